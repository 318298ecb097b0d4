#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

using namespace emgnn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "emgnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return io::read_file(p.string()); }

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "emgnn_test_cli";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(run({"gen", "--out", path("d.json"), "--dialogs", "12", "--seed", "3"}).code, 0);
    ASSERT_EQ(run(train_args("m.ckpt")).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static std::vector<std::string> train_args(const std::string& out) {
    return {"train", "--data", path("d.json"), "--out", path(out), "--quiet", "--epochs", "2", "--dim", "8",
            "--fc-dim", "8"};
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, HelpListsEveryConfigFlagWithDefault) {
  const auto r = run({"train", "--help"});
  EXPECT_EQ(r.code, 0);
  const train::RunConfig d;
  for (const auto& [flag, def] : std::vector<std::pair<std::string, std::string>>{
           {"--dim", std::to_string(d.dim)},
           {"--fc-dim", std::to_string(d.fc_dim)},
           {"--outer-iters", std::to_string(d.outer_iters)},
           {"--inner-steps", std::to_string(d.inner_steps)},
           {"--variant", d.variant},
           {"--batch-size", std::to_string(d.batch_size)},
           {"--lr-base", "0.001"},
           {"--lr-floor", "5e-05"},
           {"--epochs", std::to_string(d.epochs)},
           {"--seed", std::to_string(d.seed)},
           {"--k-options", std::to_string(d.k_options)},
           {"--mode", d.mode}}) {
    const std::regex line(flag + " [A-Z]+ \\[" + def + "\\]");
    EXPECT_TRUE(std::regex_search(r.out, line)) << flag << " [" << def << "] not in\n" << r.out;
  }
  for (const char* cmd : {"eval", "infer", "verify", "gen", "ablate", "structure"}) {
    EXPECT_EQ(run({cmd, "--help"}).code, 0) << cmd;
  }
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"train", "--data", path("d.json")}).code, 2);
  EXPECT_EQ(run({"train", "--data", path("d.json"), "--out", path("x.ckpt"), "--bogus"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"verify", "--suite", "nope"}).code, 2);
  EXPECT_EQ(run({"eval", "--data", path("d.json"), "--report", path("r.json")}).code, 2);
  auto bad_variant = train_args("x.ckpt");
  bad_variant.insert(bad_variant.end(), {"--variant", "twice"});
  EXPECT_EQ(run(bad_variant).code, 2);
  EXPECT_FALSE(fs::exists(path("x.ckpt")));
}

TEST_F(Cli, TrainWritesCheckpointAndEpochLog) {
  EXPECT_NO_THROW(train::load_model(path("m.ckpt")));
  std::istringstream log(slurp(path("m.ckpt.log.jsonl")));
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], epochs++);
    EXPECT_TRUE(j.contains("train_loss"));
    EXPECT_TRUE(j.contains("val"));
  }
  EXPECT_EQ(epochs, 2u);
}

TEST_F(Cli, SameSeedTwiceGivesIdenticalBytes) {
  ASSERT_EQ(run(train_args("again.ckpt")).code, 0);
  EXPECT_EQ(slurp(path("again.ckpt")), slurp(path("m.ckpt")));
}

TEST_F(Cli, ConfigFileMustHaveEveryKey) {
  auto j = train::to_json(train::RunConfig{});
  j.erase("inner_steps");
  spit(path("partial.json"), j.dump());
  const auto r = run({"train", "--data", path("d.json"), "--out", path("p.ckpt"), "--config", path("partial.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("inner_steps"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("p.ckpt")));
  spit(path("broken.json"), "{\"dim\": ");
  EXPECT_EQ(run({"train", "--data", path("d.json"), "--out", path("p.ckpt"), "--config", path("broken.json")}).code, 2);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  train::RunConfig c;
  c.dim = 8;
  c.fc_dim = 8;
  c.epochs = 5;
  spit(path("full.json"), train::to_json(c).dump());
  ASSERT_EQ(run({"train", "--data", path("d.json"), "--out", path("cfg.ckpt"), "--quiet", "--config",
                 path("full.json"), "--epochs", "2"})
                .code,
            0);
  EXPECT_EQ(slurp(path("cfg.ckpt")), slurp(path("m.ckpt")));
}

TEST_F(Cli, EnvironmentSeedOverridesConfig) {
  ::setenv("EMGNN_SEED", "9", 1);
  const auto r = run(train_args("env.ckpt"));
  ::unsetenv("EMGNN_SEED");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(slurp(path("env.ckpt")), slurp(path("m.ckpt")));
  auto explicit_seed = train_args("seed9.ckpt");
  explicit_seed.insert(explicit_seed.end(), {"--seed", "9"});
  ASSERT_EQ(run(explicit_seed).code, 0);
  EXPECT_EQ(slurp(path("env.ckpt")), slurp(path("seed9.ckpt")));
}

TEST_F(Cli, EvalReportHasExactKeys) {
  ASSERT_EQ(run({"eval", "--ckpt", path("m.ckpt"), "--data", path("d.json"), "--report", path("r.json")}).code, 0);
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  EXPECT_EQ(keys, (std::set<std::string>{"mrr", "r_at_1", "r_at_5", "r_at_10", "mean_rank", "ndcg", "n_examples",
                                         "per_round"}));
  EXPECT_EQ(j["n_examples"], 120);
  EXPECT_EQ(j["per_round"].size(), 10u);
  EXPECT_TRUE(j["per_round"].contains("1"));
  EXPECT_TRUE(j["per_round"].contains("10"));
}

TEST_F(Cli, GeneratorOracleScoresPerfectly) {
  ASSERT_EQ(run({"eval", "--data", path("d.json"), "--oracle", "generator", "--report", path("o.json")}).code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("o.json")))["r_at_1"], 1.0);
  ASSERT_EQ(run({"eval", "--data", path("d.json"), "--oracle", "history_blind", "--report", path("b.json")}).code, 0);
  EXPECT_LT(nlohmann::json::parse(slurp(path("b.json")))["r_at_1"].get<double>(), 1.0);
}

TEST_F(Cli, CorruptCheckpointExitsThreeWithoutReport) {
  auto bytes = slurp(path("m.ckpt"));
  bytes[bytes.size() / 2] ^= 0x01;
  spit(path("bad.ckpt"), bytes);
  const auto r = run({"eval", "--ckpt", path("bad.ckpt"), "--data", path("d.json"), "--report", path("bad.json")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("CRC"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("bad.json")));
  EXPECT_EQ(run({"eval", "--ckpt", path("absent.ckpt"), "--data", path("d.json"), "--report", path("bad.json")}).code,
            3);
}

TEST_F(Cli, InvalidDatasetExitsThree) {
  auto j = nlohmann::json::parse(slurp(path("d.json")));
  j["dialogs"][2]["rounds"][4]["gt_index"] = 20;
  spit(path("invalid.json"), j.dump());
  const auto r = run({"eval", "--ckpt", path("m.ckpt"), "--data", path("invalid.json"), "--report", path("i.json")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("dialog 2 round 4 field 'gt_index'"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("i.json")));
}

TEST_F(Cli, InferPrintsRankingAndExportsDot) {
  const auto r = run({"infer", "--ckpt", path("m.ckpt"), "--data", path("d.json"), "--dialog", "1", "--round", "4",
                      "--export-structure", path("s.dot")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t ranked = 0;
  double total = 0.0;
  std::istringstream lines(r.out);
  std::string line;
  const std::regex row(R"(^\s*(\d+)\s+([0-9.]+)\s+\S)");
  std::smatch m;
  while (std::getline(lines, line)) {
    if (std::regex_search(line, m, row)) {
      ++ranked;
      total += std::stod(m[2]);
    }
  }
  EXPECT_EQ(ranked, 20u);
  EXPECT_NEAR(total, 1.0, 1e-4);
  EXPECT_NE(r.out.find("[gt]"), std::string::npos);

  const auto dot = slurp(path("s.dot"));
  const std::regex graph(R"(^digraph \w+ \{\n(  [^\n]*;\n)*\}\n$)");
  EXPECT_TRUE(std::regex_match(dot, graph)) << dot;
  const std::regex node(R"(\n  n(\d+) \[label=)");
  std::set<std::string> nodes;
  for (auto it = std::sregex_iterator(dot.begin(), dot.end(), node); it != std::sregex_iterator(); ++it) {
    nodes.insert((*it)[1]);
  }
  EXPECT_EQ(nodes.size(), 5u);

  ASSERT_EQ(run({"infer", "--ckpt", path("m.ckpt"), "--data", path("d.json"), "--dialog", "1", "--round", "4",
                 "--export-structure", path("s2.dot")})
                .code,
            0);
  EXPECT_EQ(slurp(path("s2.dot")), dot);
}

TEST_F(Cli, InferJsonExportIsNormalized) {
  ASSERT_EQ(run({"infer", "--ckpt", path("m.ckpt"), "--data", path("d.json"), "--dialog", "0", "--round", "10",
                 "--export-structure", path("s.json")})
                .code,
            0);
  const auto j = nlohmann::json::parse(slurp(path("s.json")));
  ASSERT_EQ(j["nodes"].size(), 11u);
  for (const auto& row : j["normalized"]) {
    double s = 0.0;
    for (double v : row) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  const auto& raw = j["raw"];
  for (std::size_t a = 0; a < raw.size(); ++a) {
    for (std::size_t b = 0; b < raw.size(); ++b) EXPECT_EQ(raw[a][b], raw[b][a]);
  }
}

TEST_F(Cli, InferRejectsBadArguments) {
  const std::vector<std::string> base{"infer", "--ckpt", path("m.ckpt"), "--data", path("d.json")};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a).code;
  };
  EXPECT_EQ(with({"--round", "0"}), 2);
  EXPECT_EQ(with({"--round", "11"}), 2);
  EXPECT_EQ(with({"--dialog", "12"}), 2);
  EXPECT_EQ(with({"--export-structure", path("s.png")}), 2);

  auto no_iter = train_args("noiter.ckpt");
  no_iter.insert(no_iter.end(), {"--variant", "no_iter"});
  ASSERT_EQ(run(no_iter).code, 0);
  EXPECT_EQ(run({"infer", "--ckpt", path("noiter.ckpt"), "--data", path("d.json"), "--export-structure",
                 path("n.json")})
                .code,
            2);
  EXPECT_FALSE(fs::exists(path("n.json")));
}

TEST_F(Cli, VerifySuites) {
  const auto r = run({"verify", "--suite", "mrf"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("mrf/bp_tree_map"), std::string::npos);
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_EQ(run({"verify", "--suite", "gradcheck"}).code, 0);
}

TEST_F(Cli, GenVisdialqAndTrainInThatMode) {
  ASSERT_EQ(run({"gen", "--out", path("q.json.gz"), "--dialogs", "6", "--visdialq"}).code, 0);
  const auto q = data::load_dataset(path("q.json.gz"));
  EXPECT_EQ(q.task, data::Task::visdialq);
  EXPECT_EQ(q.num_examples(), 54u);
  auto args = train_args("q.ckpt");
  args[2] = path("q.json.gz");
  EXPECT_EQ(run(args).code, 2);
  args.insert(args.end(), {"--mode", "visdialq"});
  ASSERT_EQ(run(args).code, 0);
  ASSERT_EQ(run({"eval", "--ckpt", path("q.ckpt"), "--data", path("q.json.gz"), "--report", path("q.json")}).code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("q.json")))["n_examples"], 54);
  EXPECT_EQ(run({"eval", "--ckpt", path("q.ckpt"), "--data", path("q.json.gz"), "--mode", "visdial", "--report",
                 path("q2.json")})
                .code,
            2);
}

TEST_F(Cli, AblateAndStructureCommands) {
  const auto r = run({"ablate", "--data", path("d.json"), "--variants", "full,no_iter", "--epochs", "1", "--dim",
                      "8", "--fc-dim", "8", "--out", path("ab.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("no_iter"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("ab.json"))).size(), 2u);
  const auto s = run({"structure", "--ckpt", path("m.ckpt"), "--data", path("d.json"), "--null-draws", "20"});
  ASSERT_EQ(s.code, 0) << s.err;
  const auto j = nlohmann::json::parse(s.out);
  EXPECT_GE(j["auc"].get<double>(), 0.0);
  EXPECT_EQ(j["null_draws"], 20);
}

TEST_F(Cli, NoTemporaryFilesLeftBehind) {
  for (const auto& e : fs::directory_iterator(dir_)) {
    EXPECT_EQ(e.path().filename().string().find(".tmp."), std::string::npos) << e.path();
  }
}
