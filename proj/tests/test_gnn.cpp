#include <gtest/gtest.h>

#include <cmath>
#include <regex>
#include <vector>

#include "emgnn/autodiff/grad_check.hpp"
#include "emgnn/gnn/export.hpp"
#include "emgnn/gnn/model.hpp"

using namespace emgnn;
using namespace emgnn::gnn;
using ad::Shape;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool grad = true) {
  Tensor t = Tensor::zeros(std::move(shape), grad);
  for (double& v : t.mutable_values()) v = scale * rng.normal();
  return t;
}

std::vector<Tensor> random_states(std::size_t n, std::size_t d, Rng& rng, bool grad = false) {
  std::vector<Tensor> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(random_tensor({d}, rng, 1.0, grad));
  return s;
}

void set_identity(Tensor& w) {
  auto v = w.mutable_values();
  std::fill(v.begin(), v.end(), 0.0);
  for (std::size_t i = 0; i < std::min(w.dim(0), w.dim(1)); ++i) v[i * w.dim(1) + i] = 1.0;
}

std::vector<Tensor> all_params(GnnParams& p) {
  std::vector<Tensor> out;
  for (Tensor* t : p.tensors()) out.push_back(*t);
  return out;
}

}  // namespace

TEST(FusedGraphOps, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto f = random_states(4, 3, rng, true);
    auto x = random_tensor({4, 4}, rng);
    auto w = random_tensor({4, 4}, rng);
    auto h = random_tensor({3}, rng);
    auto proj = random_tensor({4}, rng, 1.0, false);
    auto pw = random_tensor({16}, rng, 1.0, false);
    auto flat = [&](Tape& t, const Tensor& m) {
      Tensor acc = ad::dot(t, ad::row_without_diagonal(t, m, 0), Tensor::vector({pw[0], pw[1], pw[2]}));
      for (std::size_t i = 1; i < 4; ++i) {
        acc = ad::add(t, acc, ad::dot(t, ad::row_without_diagonal(t, m, i),
                                      Tensor::vector({pw[3 * i], pw[3 * i + 1], pw[3 * i + 2]})));
      }
      return acc;
    };
    std::vector<Tensor> inputs = f;
    auto r1 = ad::grad_check([&](Tape& t) { return flat(t, ad::pairwise_dots(t, f)); }, inputs);
    EXPECT_TRUE(r1.passed(1e-6)) << "pairwise_dots seed " << seed << " " << r1.max_relative_error;
    auto r2 = ad::grad_check([&](Tape& t) { return flat(t, ad::masked_row_softmax(t, x)); }, {x});
    EXPECT_TRUE(r2.passed(1e-6)) << "masked_row_softmax seed " << seed << " " << r2.max_relative_error;
    auto r3 = ad::grad_check([&](Tape& t) { return flat(t, w); }, {w});
    EXPECT_TRUE(r3.passed(1e-6)) << "row_without_diagonal seed " << seed;
    inputs.push_back(h);
    auto r4 = ad::grad_check(
        [&](Tape& t) {
          std::vector<Tensor> opts(f.begin(), f.end());
          return ad::dot(t, ad::inner_products(t, h, opts), proj);
        },
        inputs);
    EXPECT_TRUE(r4.passed(1e-6)) << "inner_products seed " << seed << " " << r4.max_relative_error;
  }
}

TEST(LinkWeights, IdenticalStatesGiveUniformIncomingWeights) {
  Rng rng(1);
  auto p = GnnParams::uniform(4, 4, rng);
  auto h = random_tensor({4}, rng, 1.0, false);
  for (std::size_t n : {2u, 3u, 7u}) {
    auto g = DialogGraph::make(std::vector<Tensor>(n, h));
    Tape tape;
    link_weights(tape, g, p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(g.normalized[i * n + j], i == j ? 0.0 : 1.0 / static_cast<double>(n - 1), 1e-15);
      }
    }
  }
}

TEST(LinkWeights, HandEvaluatedThreeNodeGraph) {
  auto p = GnnParams::zeros(2, 2);
  set_identity(p.fc1_w);
  set_identity(p.fc2_w);
  auto g = DialogGraph::make({Tensor::vector({1, 0}), Tensor::vector({0, 1}), Tensor::vector({1, 1})});
  Tape tape;
  link_weights(tape, g, p);
  EXPECT_EQ(g.raw[0 * 3 + 2], 1.0);
  EXPECT_EQ(g.raw[0 * 3 + 1], 0.0);
  EXPECT_EQ(g.raw[1 * 3 + 2], 1.0);
  EXPECT_DOUBLE_EQ(g.normalized[2 * 3 + 0], 0.5);
  EXPECT_DOUBLE_EQ(g.normalized[2 * 3 + 1], 0.5);
  EXPECT_EQ(g.normalized[2 * 3 + 2], 0.0);
}

TEST(LinkWeights, InvariantsOnRandomGraphs) {
  Rng rng(2);
  for (int s = 0; s < 50; ++s) {
    const std::size_t n = 2 + rng.uniform_int(10), d = 1 + rng.uniform_int(6);
    auto p = GnnParams::uniform(d, 1 + rng.uniform_int(6), rng);
    auto g = DialogGraph::make(random_states(n, d, rng));
    std::vector<std::vector<double>> before;
    for (const auto& h : g.states) before.emplace_back(h.values().begin(), h.values().end());
    Tape tape;
    em_infer(tape, g, p, {.outer_iters = 1 + rng.uniform_int(4), .inner_steps = rng.uniform_int(4)});
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(g.raw[i * n + j], g.raw[j * n + i]);
        total += g.normalized[i * n + j];
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
      if (g.observed[i]) {
        const auto now = g.states[i].values();
        EXPECT_TRUE(std::equal(now.begin(), now.end(), before[i].begin(), before[i].end()));
      }
    }
  }
}

TEST(Aggregate, EqualWeightsGiveMeanAndSingleNeighborPassesThrough) {
  Rng rng(3);
  auto g = DialogGraph::make(random_states(4, 3, rng));
  constant_weights(g);
  Tape tape;
  const auto m = aggregate_messages(tape, g);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(m[3][c], (g.states[0][c] + g.states[1][c] + g.states[2][c]) / 3.0, 1e-15);
  }
  EXPECT_FALSE(m[0].defined());

  auto pair = DialogGraph::make(random_states(2, 3, rng));
  constant_weights(pair);
  const auto m2 = aggregate_messages(tape, pair);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(m2[1][c], pair.states[0][c]);
}

TEST(Aggregate, MatchesDenseMatrixProduct) {
  Rng rng(4);
  for (int s = 0; s < 20; ++s) {
    auto p = GnnParams::uniform(3, 3, rng);
    auto g = DialogGraph::make(random_states(4, 3, rng));
    Tape tape;
    link_weights(tape, g, p);
    const auto m = aggregate_messages(tape, g);
    // Dense oracle: row 3 of Ŵ times the 4×3 state matrix.
    for (std::size_t c = 0; c < 3; ++c) {
      double v = 0.0;
      for (std::size_t j = 0; j < 4; ++j) v += g.normalized[3 * 4 + j] * g.states[j][c];
      EXPECT_NEAR(m[3][c], v, 1e-12);
    }
  }
}

TEST(UpdateStates, ZeroStepsIsIdentity) {
  Rng rng(5);
  auto p = GnnParams::uniform(3, 3, rng);
  auto g = DialogGraph::make(random_states(3, 3, rng));
  const auto q = g.states[2];
  Tape tape;
  link_weights(tape, g, p);
  update_states(tape, g, p, 0);
  EXPECT_EQ(g.states[2].id(), q.id());
}

TEST(UpdateStates, ZeroGruHalvesQueryState) {
  auto p = GnnParams::zeros(1, 1);
  auto g = DialogGraph::make({Tensor::vector({0.8}), Tensor::vector({-0.6})});
  Tape tape;
  constant_weights(g);
  update_states(tape, g, p, 1);
  EXPECT_EQ(g.states[1][0], -0.3);
  EXPECT_EQ(g.states[0][0], 0.8);
}

TEST(EmInfer, ZeroOuterIterationsLeavesInitialization) {
  Rng rng(6);
  auto p = GnnParams::uniform(3, 3, rng);
  auto g = DialogGraph::make(random_states(4, 3, rng));
  const auto q = g.states.back();
  Tape tape;
  em_infer(tape, g, p, {.outer_iters = 0});
  EXPECT_EQ(g.states.back().id(), q.id());
  EXPECT_FALSE(g.has_weights());
  EXPECT_EQ(tape.size(), 0u);
}

TEST(EmInfer, OneIterationEqualsManualComposition) {
  Rng rng(7);
  auto p = GnnParams::uniform(3, 4, rng);
  const auto states = random_states(5, 3, rng);
  auto a = DialogGraph::make(states);
  auto b = DialogGraph::make(states);
  Tape tape;
  em_infer(tape, a, p, {.outer_iters = 1, .inner_steps = 1});
  link_weights(tape, b, p);
  update_states(tape, b, p, 1);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a.states[4][c], b.states[4][c]);
  for (std::size_t k = 0; k < 25; ++k) EXPECT_EQ(a.normalized[k], b.normalized[k]);
}

TEST(EmInfer, EndToEndLossPassesGradCheck) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::size_t d = 3;
    auto p = GnnParams::uniform(d, 3, rng);
    for (Tensor* t : p.tensors()) {
      for (double& v : t->mutable_values()) v *= 2.0;
    }
    auto states = random_states(4, d, rng, true);
    auto options = random_states(5, d, rng, true);
    std::vector<Tensor> inputs = all_params(p);
    inputs.insert(inputs.end(), states.begin(), states.end());
    inputs.insert(inputs.end(), options.begin(), options.end());
    auto r = ad::grad_check(
        [&](Tape& t) {
          auto g = DialogGraph::make(states);
          em_infer(t, g, p, {.outer_iters = 2, .inner_steps = 2});
          return ad::cross_entropy(t, score_options(t, g.states.back(), options).scores, seed % 5);
        },
        inputs);
    EXPECT_TRUE(r.passed(1e-4)) << "seed " << seed << " err " << r.max_relative_error << " at input "
                                << r.worst_input << "[" << r.worst_coord << "]";
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(EmInfer, PermutingHistoryLeavesQueryUnchanged) {
  Rng rng(8);
  for (int s = 0; s < 10; ++s) {
    auto p = GnnParams::uniform(4, 4, rng);
    auto states = random_states(6, 4, rng);
    auto perm = states;
    std::swap(perm[1], perm[4]);
    std::swap(perm[0], perm[3]);
    auto a = DialogGraph::make(states);
    auto b = DialogGraph::make(perm);
    Tape tape;
    em_infer(tape, a, p, {});
    em_infer(tape, b, p, {});
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a.states[5][c], b.states[5][c], 1e-12);
  }
}

TEST(EmInfer, ConstantGraphUsesUniformWeights) {
  Rng rng(9);
  auto p = GnnParams::uniform(3, 3, rng);
  auto g = DialogGraph::make(random_states(5, 3, rng));
  Tape tape;
  em_infer(tape, g, p, {.outer_iters = 2, .inner_steps = 1, .constant_graph = true});
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(g.normalized[4 * 5 + j], 0.25);
}

TEST(ScoreOptions, ClosedFormProbabilities) {
  Tape tape;
  auto s = score_options(tape, Tensor::vector({1, 0}), {Tensor::vector({1, 0}), Tensor::vector({0, 1})});
  const double e = std::exp(1.0);
  EXPECT_NEAR(s.probabilities[0], e / (e + 1), 1e-15);
  EXPECT_NEAR(s.probabilities[1], 1 / (e + 1), 1e-15);
  EXPECT_NEAR(s.probabilities[0], 0.7311, 1e-4);
}

TEST(ScoreOptions, DuplicatesTieAndRankByIndex) {
  Tape tape;
  auto o = Tensor::vector({0.3, -0.2});
  auto s = score_options(tape, Tensor::vector({1, 2}), {Tensor::vector({0, 0}), o, o});
  EXPECT_EQ(s.scores[1], s.scores[2]);
  EXPECT_EQ(ranking(s.scores.values()), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(rank_of(s.scores.values(), 1), 2u);
  EXPECT_EQ(rank_of(s.scores.values(), 2), 3u);
  EXPECT_THROW(score_options(tape, Tensor::vector({1, 2, 3}), {o}), DimensionError);
}

TEST(ScoreOptions, CrossEntropyGradCheck) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto h = random_tensor({4}, rng);
    auto opts = random_states(6, 4, rng, true);
    std::vector<Tensor> inputs = opts;
    inputs.push_back(h);
    auto r = ad::grad_check(
        [&](Tape& t) { return ad::cross_entropy(t, score_options(t, h, opts).scores, seed % 6); },
        inputs);
    EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error;
  }
}

TEST(StructureExport, JsonAndDot) {
  Rng rng(10);
  auto p = GnnParams::uniform(3, 3, rng);
  auto g = DialogGraph::make(random_states(4, 3, rng));
  Tape tape;
  em_infer(tape, g, p, {});
  const auto j = structure_json(g);
  EXPECT_EQ(j["nodes"].size(), 4u);
  for (const auto& row : j["normalized"]) {
    double total = 0.0;
    for (double v : row) total += v;
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  const auto dot = structure_dot(g);
  EXPECT_EQ(dot, structure_dot(g));
  const std::regex node_re(R"(\n  n\d+ \[label=)");
  EXPECT_EQ(std::distance(std::sregex_iterator(dot.begin(), dot.end(), node_re), std::sregex_iterator()), 4);
  EXPECT_EQ(dot.rfind("digraph dialog {", 0), 0u);
  EXPECT_EQ(dot.back(), '\n');
  auto empty = DialogGraph::make(random_states(2, 3, rng));
  EXPECT_THROW(structure_json(empty), DimensionError);
}
