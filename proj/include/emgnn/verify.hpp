#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgnn/autodiff/grad_check.hpp"
#include "emgnn/autodiff/graph_ops.hpp"
#include "emgnn/autodiff/gru.hpp"
#include "emgnn/autodiff/ops.hpp"
#include "emgnn/error.hpp"
#include "emgnn/gnn/model.hpp"
#include "emgnn/mrf/bp.hpp"
#include "emgnn/mrf/bruteforce.hpp"
#include "emgnn/mrf/em.hpp"
#include "emgnn/mrf/random.hpp"
#include "emgnn/rng.hpp"
#include "emgnn/text/encoder.hpp"
#include "emgnn/train/model.hpp"

namespace emgnn::verify {

using ad::Tape;
using ad::Tensor;

/// One line of a verification table. `value` is the worst observation over
/// all cases and passes when it does not exceed `tolerance` (strictly below
/// for gradient errors).
struct Check {
  std::string suite;
  std::string name;
  std::size_t cases = 0;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;

  bool passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  void append(const Report& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }

  std::string table() const {
    std::size_t w = 5;
    for (const auto& c : checks) w = std::max(w, c.suite.size() + 1 + c.name.size());
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %5s  %12s  %10s  %s\n", static_cast<int>(w), "check", "cases", "worst",
                  "tolerance", "result");
    out += buf;
    for (const auto& c : checks) {
      std::snprintf(buf, sizeof buf, "%-*s  %5zu  %12.3e  %10.1e  %s", static_cast<int>(w),
                    (c.suite + "/" + c.name).c_str(), c.cases, c.value, c.tolerance, c.passed ? "PASS" : "FAIL");
      out += buf;
      if (!c.detail.empty()) out += "  " + c.detail;
      out += "\n";
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : checks) {
      rows.push_back({{"suite", c.suite},
                      {"name", c.name},
                      {"cases", c.cases},
                      {"worst", c.value},
                      {"tolerance", c.tolerance},
                      {"passed", c.passed},
                      {"detail", c.detail}});
    }
    return {{"passed", passed()}, {"checks", rows}};
  }
};

namespace detail {

inline Tensor random_tensor(ad::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.mutable_values()) v = scale * rng.normal();
  return t;
}

inline Tensor fixed_tensor(ad::Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), false);
  for (double& v : t.mutable_values()) v = rng.normal();
  return t;
}

/// Scalar that touches every off-diagonal entry of a square matrix.
inline Tensor project_matrix(Tape& t, const Tensor& m, const Tensor& w) {
  const std::size_t n = m.dim(0);
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(ad::row_without_diagonal(t, m, i));
  return ad::dot(t, ad::concat(t, rows), w);
}

/// A case builds its inputs from a seed and returns the function to check.
struct GradCase {
  std::string name;
  double tolerance;
  std::function<std::pair<std::function<Tensor(Tape&)>, std::vector<Tensor>>(Rng&, std::uint64_t)> make;
};

inline std::vector<GradCase> grad_cases() {
  using Fn = std::function<Tensor(Tape&)>;
  using In = std::vector<Tensor>;
  constexpr double op = 1e-6, composite = 1e-4;
  std::vector<GradCase> c;
  auto unary = [&](std::string name, std::function<Tensor(Tape&, const Tensor&)> f) {
    c.push_back({name, op, [f](Rng& rng, std::uint64_t) {
                   auto x = random_tensor({5}, rng);
                   auto w = fixed_tensor({5}, rng);
                   return std::pair{Fn([=](Tape& t) { return ad::dot(t, f(t, x), w); }), In{x}};
                 }});
  };
  auto binary = [&](std::string name, std::function<Tensor(Tape&, const Tensor&, const Tensor&)> f) {
    c.push_back({name, op, [f](Rng& rng, std::uint64_t) {
                   auto a = random_tensor({5}, rng), b = random_tensor({5}, rng);
                   auto w = fixed_tensor({5}, rng);
                   return std::pair{Fn([=](Tape& t) { return ad::dot(t, f(t, a, b), w); }), In{a, b}};
                 }});
  };
  c.push_back({"linear", op, [](Rng& rng, std::uint64_t) {
                 auto x = random_tensor({4}, rng), w = random_tensor({3, 4}, rng), b = random_tensor({3}, rng);
                 auto p = fixed_tensor({3}, rng);
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::linear(t, x, w, b), p); }), In{x, w, b}};
               }});
  unary("relu", [](Tape& t, const Tensor& x) { return ad::relu(t, x); });
  unary("sigmoid", [](Tape& t, const Tensor& x) { return ad::sigmoid(t, x); });
  unary("tanh", [](Tape& t, const Tensor& x) { return ad::tanh(t, x); });
  unary("softmax", [](Tape& t, const Tensor& x) { return ad::softmax(t, x); });
  unary("scale", [](Tape& t, const Tensor& x) { return ad::scale(t, x, -1.7); });
  binary("add", [](Tape& t, const Tensor& a, const Tensor& b) { return ad::add(t, a, b); });
  binary("sub", [](Tape& t, const Tensor& a, const Tensor& b) { return ad::sub(t, a, b); });
  binary("mul", [](Tape& t, const Tensor& a, const Tensor& b) { return ad::mul(t, a, b); });
  c.push_back({"dot", op, [](Rng& rng, std::uint64_t) {
                 auto a = random_tensor({5}, rng), b = random_tensor({5}, rng);
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, a, b); }), In{a, b}};
               }});
  c.push_back({"sum", op, [](Rng& rng, std::uint64_t) {
                 auto a = random_tensor({5}, rng);
                 return std::pair{Fn([=](Tape& t) { return ad::sum(t, ad::mul(t, a, a)); }), In{a}};
               }});
  c.push_back({"concat", op, [](Rng& rng, std::uint64_t) {
                 auto a = random_tensor({2}, rng), b = random_tensor({3}, rng);
                 auto w = fixed_tensor({5}, rng);
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::concat(t, {a, b}), w); }), In{a, b}};
               }});
  c.push_back({"weighted_sum", op, [](Rng& rng, std::uint64_t) {
                 auto k = random_tensor({3}, rng);
                 In v{random_tensor({4}, rng), random_tensor({4}, rng), random_tensor({4}, rng)};
                 auto w = fixed_tensor({4}, rng);
                 In inputs{k};
                 inputs.insert(inputs.end(), v.begin(), v.end());
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::weighted_sum(t, k, v), w); }), inputs};
               }});
  c.push_back({"embedding", op, [](Rng& rng, std::uint64_t seed) {
                 auto table = random_tensor({5, 3}, rng);
                 auto w = fixed_tensor({3}, rng);
                 const std::size_t row = 1 + seed % 4;
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::embedding(t, table, row), w); }), In{table}};
               }});
  c.push_back({"cross_entropy", op, [](Rng& rng, std::uint64_t seed) {
                 auto x = random_tensor({6}, rng);
                 return std::pair{Fn([=](Tape& t) { return ad::cross_entropy(t, x, seed % 6); }), In{x}};
               }});
  c.push_back({"pairwise_dots", op, [](Rng& rng, std::uint64_t) {
                 In f{random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
                 auto w = fixed_tensor({12}, rng);
                 return std::pair{Fn([=](Tape& t) { return project_matrix(t, ad::pairwise_dots(t, f), w); }), f};
               }});
  c.push_back({"masked_row_softmax", op, [](Rng& rng, std::uint64_t) {
                 auto x = random_tensor({4, 4}, rng);
                 auto w = fixed_tensor({12}, rng);
                 return std::pair{Fn([=](Tape& t) { return project_matrix(t, ad::masked_row_softmax(t, x), w); }),
                                  In{x}};
               }});
  c.push_back({"row_without_diagonal", op, [](Rng& rng, std::uint64_t seed) {
                 auto x = random_tensor({4, 4}, rng);
                 auto w = fixed_tensor({3}, rng);
                 const std::size_t i = seed % 4;
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::row_without_diagonal(t, x, i), w); }),
                                  In{x}};
               }});
  c.push_back({"inner_products", op, [](Rng& rng, std::uint64_t) {
                 auto h = random_tensor({3}, rng);
                 In o{random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
                 auto w = fixed_tensor({3}, rng);
                 In inputs{h};
                 inputs.insert(inputs.end(), o.begin(), o.end());
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::inner_products(t, h, o), w); }), inputs};
               }});
  c.push_back({"gru_cell", op, [](Rng& rng, std::uint64_t) {
                 auto p = ad::GruParams::uniform(3, 4, rng);
                 auto h = random_tensor({4}, rng), m = random_tensor({3}, rng);
                 auto w = fixed_tensor({4}, rng);
                 In inputs{h, m};
                 for (Tensor* t : p.tensors()) inputs.push_back(*t);
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::gru_cell(t, h, m, p), w); }), inputs};
               }});
  c.push_back({"gru_input", op, [](Rng& rng, std::uint64_t) {
                 auto p = ad::GruParams::uniform(3, 4, rng);
                 auto m = random_tensor({3}, rng);
                 auto w = fixed_tensor({12}, rng);
                 In inputs{m, p.w_z, p.b_z, p.w_r, p.b_r, p.w_h, p.b_h};
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::gru_input(t, m, p), w); }), inputs};
               }});
  c.push_back({"gru_step", op, [](Rng& rng, std::uint64_t) {
                 auto p = ad::GruParams::uniform(3, 4, rng);
                 auto h = random_tensor({4}, rng), x = random_tensor({12}, rng);
                 auto w = fixed_tensor({4}, rng);
                 In inputs{h, x, p.u_z, p.u_r, p.u_h};
                 return std::pair{Fn([=](Tape& t) { return ad::dot(t, ad::gru_step(t, h, x, p), w); }), inputs};
               }});
  c.push_back({"encoder", composite, [](Rng& rng, std::uint64_t) {
                 auto p = text::EncoderParams::uniform(7, 3, 3, 2, rng);
                 auto ctx = random_tensor({2}, rng);
                 auto w = fixed_tensor({3}, rng);
                 std::vector<std::size_t> ids{3, 0, 5, 2, 6};
                 In inputs{ctx};
                 for (Tensor* t : p.tensors()) inputs.push_back(*t);
                 return std::pair{Fn([=](Tape& t) {
                                    return ad::dot(t, text::fuse(t, text::encode_sequence(t, ids, p), ctx, p), w);
                                  }),
                                  inputs};
               }});
  c.push_back({"em_infer", composite, [](Rng& rng, std::uint64_t seed) {
                 const std::size_t d = 3;
                 auto p = gnn::GnnParams::uniform(d, 3, rng);
                 In states{random_tensor({d}, rng), random_tensor({d}, rng), random_tensor({d}, rng),
                           random_tensor({d}, rng)};
                 In options;
                 for (int k = 0; k < 5; ++k) options.push_back(random_tensor({d}, rng));
                 In inputs;
                 for (Tensor* t : p.tensors()) inputs.push_back(*t);
                 inputs.insert(inputs.end(), states.begin(), states.end());
                 inputs.insert(inputs.end(), options.begin(), options.end());
                 const std::size_t target = seed % 5;
                 return std::pair{Fn([=](Tape& t) {
                                    auto g = gnn::DialogGraph::make(states);
                                    gnn::em_infer(t, g, p, {.outer_iters = 3, .inner_steps = 2});
                                    return ad::cross_entropy(t, gnn::score_options(t, g.states.back(), options).scores,
                                                             target);
                                  }),
                                  inputs};
               }});
  return c;
}

}  // namespace detail

/// Central-difference check of every autodiff op and of the end-to-end
/// loss, each over `seeds` random instances.
inline Report gradcheck_suite(std::size_t seeds = 10) {
  Report rep;
  for (const auto& c : detail::grad_cases()) {
    Check row{"gradcheck", c.name, seeds, 0.0, c.tolerance, true, ""};
    std::size_t checked = 0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
      Rng rng(1000 + s);
      auto [f, inputs] = c.make(rng, s);
      const auto r = ad::grad_check(f, inputs);
      checked += r.checked;
      if (!r.finite) {
        row.passed = false;
        row.value = INFINITY;
        row.detail = "non-finite at seed " + std::to_string(s);
        continue;
      }
      if (r.max_relative_error > row.value) row.value = r.max_relative_error;
      if (!r.passed(c.tolerance)) {
        row.passed = false;
        row.detail = "seed " + std::to_string(s) + " input " + std::to_string(r.worst_input) + "[" +
                     std::to_string(r.worst_coord) + "]";
      }
    }
    if (checked == 0) {
      row.passed = false;
      row.detail = "no coordinate checked";
    }
    rep.checks.push_back(std::move(row));
  }
  return rep;
}

/// Max-product BP against enumeration on random trees.
inline Report bp_suite(std::size_t trees = 100) {
  Report rep;
  {
    Check row{"mrf", "bp_tree_map", trees, 0.0, 0.0, true, ""};
    Rng rng(7);
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < trees; ++s) {
      const std::size_t n = 2 + rng.uniform_int(5);
      auto m = mrf::random_mrf({.nodes = n, .max_cardinality = 4}, rng);
      auto obs = mrf::random_observation(m, 0.3, rng);
      if (mrf::max_product_bp(m, obs).assignment.states != mrf::map_bruteforce(m, obs).states) ++mismatches;
    }
    row.value = static_cast<double>(mismatches);
    row.passed = mismatches == 0;
    if (!row.passed) row.detail = std::to_string(mismatches) + " trees disagree";
    rep.checks.push_back(std::move(row));
  }
  return rep;
}

/// Monotonicity of the EM surrogate objective on loopy partially observed
/// models.
inline Report em_suite(std::size_t models = 20) {
  Report rep;
  {
    Check row{"mrf", "em_monotone", models, 0.0, 1e-9, true, ""};
    Rng rng(11);
    for (std::size_t s = 0; s < models; ++s) {
      auto m = mrf::random_mrf({.nodes = 5, .max_cardinality = 3, .extra_edge_prob = 0.4}, rng);
      auto obs = mrf::random_observation(m, 0.5, rng);
      const auto em = mrf::em_fit(m, obs, {.outer_iters = 10, .mstep = {.steps = 5}});
      for (std::size_t k = 1; k < em.objective.size(); ++k) {
        row.value = std::max(row.value, em.objective[k - 1] - em.objective[k]);
      }
    }
    row.passed = row.value <= row.tolerance;
    row.detail = "largest decrease of log p(x,z*|W)";
    rep.checks.push_back(std::move(row));
  }
  return rep;
}

inline Report mrf_suite(std::size_t trees = 100, std::size_t em_models = 20) {
  Report rep = bp_suite(trees);
  rep.append(em_suite(em_models));
  return rep;
}

/// Accumulates the link-weight invariants over inferred graphs: rows of the
/// normalized matrix sum to 1, the raw matrix is symmetric and observed
/// states are untouched.
class GraphInvariants {
 public:
  explicit GraphInvariants(std::string suite)
      : norm_{suite, "row_sum", 0, 0.0, 1e-6, true, "max |sum - 1|"},
        sym_{suite, "raw_symmetry", 0, 0.0, 0.0, true, "max |raw_ij - raw_ji|"},
        obs_{suite, "observed_unchanged", 0, 0.0, 0.0, true, "changed observed coordinates"} {}

  static std::vector<std::vector<double>> snapshot(const gnn::DialogGraph& g) {
    std::vector<std::vector<double>> out;
    for (const auto& h : g.states) out.emplace_back(h.values().begin(), h.values().end());
    return out;
  }

  void observe(const gnn::DialogGraph& g, const std::vector<std::vector<double>>& before) {
    const std::size_t n = g.size();
    for (Check* c : {&norm_, &sym_, &obs_}) ++c->cases;
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        sym_.value = std::max(sym_.value, std::abs(g.raw[i * n + j] - g.raw[j * n + i]));
        total += g.normalized[i * n + j];
      }
      norm_.value = std::max(norm_.value, std::abs(total - 1.0));
      if (!g.observed[i]) continue;
      const auto now = g.states[i].values();
      for (std::size_t c = 0; c < now.size(); ++c) {
        if (now[c] != before[i][c]) obs_.value += 1.0;
      }
    }
  }

  Report report() const {
    Check norm = norm_, sym = sym_, obs = obs_;
    const bool any = norm.cases > 0;
    norm.passed = any && norm.value <= norm.tolerance;
    sym.passed = any && sym.value == 0.0;
    obs.passed = any && obs.value == 0.0;
    Report rep;
    rep.checks = {norm, sym, obs};
    return rep;
  }

 private:
  Check norm_, sym_, obs_;
};

/// Link-weight invariants after em_infer on random graphs.
inline Report graph_suite(std::size_t graphs = 50) {
  GraphInvariants inv("graph");
  Rng rng(13);
  for (std::size_t s = 0; s < graphs; ++s) {
    const std::size_t n = 2 + rng.uniform_int(10), d = 1 + rng.uniform_int(8);
    auto p = gnn::GnnParams::uniform(d, 1 + rng.uniform_int(8), rng);
    std::vector<Tensor> states;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor t = Tensor::zeros({d});
      for (double& v : t.mutable_values()) v = rng.normal();
      states.push_back(t);
    }
    auto g = gnn::DialogGraph::make(states);
    const auto before = GraphInvariants::snapshot(g);
    Tape tape(false);
    gnn::em_infer(tape, g, p, {.outer_iters = 1 + rng.uniform_int(4), .inner_steps = rng.uniform_int(4)});
    inv.observe(g, before);
  }
  return inv.report();
}

/// The same invariants on the graphs a trained model builds for the first
/// `max_examples` rounds of `ds`.
inline Report model_graph_suite(const train::Model& m, const data::DialogDataset& ds, std::size_t max_examples) {
  if (m.infer.outer_iters == 0) throw ConfigError("model_graph_suite: model runs no EM iteration");
  GraphInvariants inv("model_graph");
  const auto examples = train::prepare(ds, m.vocab);
  for (std::size_t k = 0; k < examples.size() && k < max_examples; ++k) {
    const auto& ex = examples[k];
    Tape tape(false);
    auto g = text::init_node_states(tape, ex.text, ex.context, m.enc);
    const auto before = GraphInvariants::snapshot(g);
    gnn::em_infer(tape, g, m.gnn, m.infer);
    inv.observe(g, before);
  }
  return inv.report();
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> v{"gradcheck", "mrf", "graph", "all"};
  return v;
}

inline Report run_suite(const std::string& name) {
  if (name == "gradcheck") return gradcheck_suite();
  if (name == "mrf") return mrf_suite();
  if (name == "graph") return graph_suite();
  if (name == "all") {
    Report r = gradcheck_suite();
    r.append(mrf_suite());
    r.append(graph_suite());
    return r;
  }
  throw ConfigError("unknown suite '" + name + "' (expected gradcheck, mrf, graph or all)");
}

}  // namespace emgnn::verify
