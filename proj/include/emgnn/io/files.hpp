#pragma once

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include <unistd.h>

#include "emgnn/error.hpp"

namespace emgnn::io {

inline bool has_suffix(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Whole file as bytes; gzip streams are inflated transparently.
inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string raw = ss.str();
  if (raw.size() < 2 || static_cast<unsigned char>(raw[0]) != 0x1f ||
      static_cast<unsigned char>(raw[1]) != 0x8b) {
    return raw;
  }
  gzFile gz = gzopen(path.c_str(), "rb");
  if (!gz) throw DataError("cannot open gzip stream '" + path + "'");
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(gz, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = Z_OK;
  const char* msg = gzerror(gz, &err);
  gzclose(gz);
  if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
    throw DataError("corrupt gzip stream '" + path + "': " + msg);
  }
  return out;
}

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never see a partial file. A ".gz" path is gzip-compressed.
inline void write_file_atomic(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  bool ok = false;
  if (has_suffix(path, ".gz")) {
    gzFile gz = gzopen(tmp.c_str(), "wb9");
    if (gz) {
      ok = bytes.empty() ||
           gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size())) == static_cast<int>(bytes.size());
      ok = (gzclose(gz) == Z_OK) && ok;
    }
  } else {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    ok = static_cast<bool>(out);
  }
  std::error_code ec;
  if (ok) std::filesystem::rename(tmp, path, ec);
  if (!ok || ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot write '" + path + "'");
  }
}

}  // namespace emgnn::io
