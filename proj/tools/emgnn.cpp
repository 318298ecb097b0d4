#include "cli.hpp"

int main(int argc, char** argv) { return emgnn::cli::run(argc, argv); }
