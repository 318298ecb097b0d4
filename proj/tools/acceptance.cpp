// Acceptance run: one PASS/FAIL line per criterion, each followed by the
// measurements it was decided on.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace emgnn;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

char buf[512];

template <class... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

std::string worst_of(const verify::Report& r) {
  std::string out;
  for (const auto& c : r.checks) {
    if (!out.empty()) out += ", ";
    out += fmt("%s %.3g%s%.0e", c.name.c_str(), c.value, c.passed ? " <= " : " > ", c.tolerance);
  }
  return out;
}

Outcome from_report(const verify::Report& r) { return {r.passed(), worst_of(r)}; }

data::SyntheticSpec bench_spec(std::size_t n, std::uint64_t seed) {
  data::SyntheticSpec s;
  s.n_dialogs = n;
  s.seed = seed;
  return s;
}

// Synthetic benchmark: 500 training dialogs (the trainer validates on their
// last tenth) and held-out dialogs from a different generator seed.
const data::DialogDataset& train_set() {
  static const auto ds = data::gen_synthetic(bench_spec(500, 7));
  return ds;
}

train::RunConfig ablation_config(std::uint64_t seed) {
  train::RunConfig c;
  c.lr_base = 0.005;
  c.epochs = 10;
  c.seed = seed;
  return c;
}

train::RunConfig structure_config() {
  train::RunConfig c;
  c.lr_base = 0.003;
  c.epochs = 20;
  c.seed = 1;
  return c;
}

Outcome ablation() {
  const auto held_out = data::gen_synthetic(bench_spec(100, 99));
  std::size_t agree = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t = train::run_ablation(train_set(), held_out, ablation_config(seed), train::default_ablation_variants());
    const double full = t[0].metrics.mrr, cg = t[1].metrics.mrr, ni = t[2].metrics.mrr;
    const bool ok = full > cg && cg > ni;
    agree += ok;
    detail += fmt("%sseed %d: %.4f %s %.4f %s %.4f", detail.empty() ? "" : "; ", static_cast<int>(seed), full,
                  full > cg ? ">" : "<=", cg, cg > ni ? ">" : "<=", ni);
  }
  return {agree >= 3, "MRR full / const_graph / no_iter, " + detail + fmt(" (%zu of 3 seeds ordered)", agree)};
}

Outcome structure() {
  const auto res = train::train(train_set(), structure_config());
  const auto held_out = data::gen_synthetic(bench_spec(200, 99));
  const auto rep = train::structure_auc(train::structure_samples(res.model, held_out), 1000);
  constexpr double threshold = 0.7;
  const bool ok = rep.auc >= threshold && threshold > rep.null_p95 && rep.auc > rep.null_p95;
  return {ok, fmt("AUC %.4f over %zu dialogs / %zu rounds, threshold %.2f, permutation null mean %.4f p95 %.4f",
                  rep.auc, rep.n_dialogs, rep.n_rounds, threshold, rep.null_mean, rep.null_p95)};
}

Outcome oracles() {
  const auto& ds = train_set();
  std::size_t n = 0, gen = 0, blind = 0;
  for (std::size_t d = 0; d < ds.dialogs.size(); ++d) {
    for (std::size_t r = 0; r < ds.dialogs[d].rounds.size(); ++r) {
      const std::size_t gt = ds.dialogs[d].rounds[r].gt_index;
      gen += data::generator_oracle(ds, d, r) == gt;
      blind += data::history_blind_oracle(ds, d, r) == gt;
      ++n;
    }
  }
  const double g = static_cast<double>(gen) / static_cast<double>(n);
  const double b = static_cast<double>(blind) / static_cast<double>(n);
  return {g == 1.0 && b < g, fmt("R@1 generator %.4f, history-blind %.4f, gap %.4f over %zu rounds", g, b, g - b, n)};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "emgnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::vector<std::string> small_train(const fs::path& data, const fs::path& out) {
  return {"train", "--data", data.string(), "--out", out.string(), "--quiet", "--epochs", "2", "--dim", "16",
          "--fc-dim", "16", "--seed", "5"};
}

Outcome determinism(const fs::path& dir) {
  const auto data = dir / "det.json";
  if (cli({"gen", "--out", data.string(), "--dialogs", "60", "--seed", "3"}) != 0) return {false, "gen failed"};
  const auto a = dir / "a.ckpt", b = dir / "b.ckpt", c = dir / "c.ckpt";
  if (cli(small_train(data, a)) != 0 || cli(small_train(data, b)) != 0) return {false, "train failed"};
  train::save_model(c.string(), train::load_model(a.string()));
  const auto ba = io::read_file(a.string()), bb = io::read_file(b.string()), bc = io::read_file(c.string());
  return {ba == bb && ba == bc, fmt("two trainings %s (%zu bytes), save->load->save %s", ba == bb ? "identical" : "differ",
                                    ba.size(), ba == bc ? "identical" : "differs")};
}

Outcome visdialq(const fs::path& dir) {
  const auto src = data::gen_synthetic(bench_spec(60, 3));
  const auto q = data::to_visdialq(src, 20, 1);
  bool nine = q.dialogs.size() == src.dialogs.size();
  for (const auto& d : q.dialogs) nine = nine && d.rounds.size() == 9;
  const auto data = dir / "q.json.gz";
  const auto ckpt = dir / "q.ckpt";
  const auto report = dir / "q_report.json";
  bool ran = cli({"gen", "--out", data.string(), "--dialogs", "60", "--seed", "3", "--visdialq"}) == 0;
  auto args = small_train(data, ckpt);
  args.insert(args.end(), {"--mode", "visdialq"});
  ran = ran && cli(args) == 0;
  ran = ran && cli({"eval", "--ckpt", ckpt.string(), "--data", data.string(), "--report", report.string()}) == 0;
  if (!ran) return {false, fmt("%zu examples per 10-round dialog; pipeline failed", q.num_examples() / q.dialogs.size())};
  const auto j = nlohmann::json::parse(io::read_file(report.string()));
  const auto inv = verify::model_graph_suite(train::load_model(ckpt.string()), data::load_dataset(data.string()), 200);
  return {nine && inv.passed(), fmt("%zu examples per 10-round dialog; train/eval ran, MRR %.4f on %d examples; ",
                                    q.num_examples() / q.dialogs.size(), j["mrr"].get<double>(),
                                    j["n_examples"].get<int>()) +
                                    worst_of(inv)};
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("emgnn_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  const std::vector<Criterion> criteria{
      {"gradient_integrity", 30, [] { return from_report(verify::gradcheck_suite(10)); }},
      {"bp_exactness", 30, [] { return from_report(verify::bp_suite(100)); }},
      {"em_monotonicity", 60, [] { return from_report(verify::em_suite(20)); }},
      {"normalization_symmetry", 0, [] { return from_report(verify::graph_suite(50)); }},
      {"ablation_ordering", 600, ablation},
      {"structure_recovery", 600, structure},
      {"oracle_bounds", 0, oracles},
      {"determinism", 0, [&] { return determinism(dir); }},
      {"visdialq_mode", 0, [&] { return visdialq(dir); }},
  };

  std::size_t passed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s == 0 || s < c.limit_s;
    const bool ok = o.passed && in_time;
    passed += ok;
    std::string timing = c.limit_s > 0 ? fmt("%.1f s < %.0f s", s, c.limit_s) : fmt("%.1f s", s);
    if (!in_time) timing = fmt("%.1f s exceeds %.0f s", s, c.limit_s);
    std::cout << (ok ? "PASS  " : "FAIL  ") << c.name << "  [" << timing << "]\n      " << o.detail << "\n"
              << std::flush;
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed\n";
  fs::remove_all(dir);
  return passed == criteria.size() ? 0 : 1;
}
