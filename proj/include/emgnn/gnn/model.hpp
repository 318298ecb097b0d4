#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emgnn/autodiff/graph_ops.hpp"
#include "emgnn/autodiff/gru.hpp"
#include "emgnn/rng.hpp"

namespace emgnn::gnn {

using ad::Tape;
using ad::Tensor;

/// Link function (two fc layers with a ReLU between) and the GRU update.
struct GnnParams {
  Tensor fc1_w, fc1_b, fc2_w, fc2_b;
  ad::GruParams gru;

  std::size_t state_dim() const { return gru.state_dim(); }
  std::size_t link_dim() const { return fc2_b.size(); }

  static GnnParams zeros(std::size_t d, std::size_t k) {
    GnnParams p;
    p.fc1_w = Tensor::zeros({k, d}, true);
    p.fc1_b = Tensor::zeros({k}, true);
    p.fc2_w = Tensor::zeros({k, k}, true);
    p.fc2_b = Tensor::zeros({k}, true);
    p.gru = ad::GruParams::zeros(d, d);
    return p;
  }

  static GnnParams uniform(std::size_t d, std::size_t k, Rng& rng) {
    GnnParams p = zeros(d, k);
    const double a = 1.0 / std::sqrt(static_cast<double>(d));
    for (Tensor* t : {&p.fc1_w, &p.fc1_b, &p.fc2_w, &p.fc2_b}) {
      for (double& v : t->mutable_values()) v = rng.uniform(-a, a);
    }
    p.gru = ad::GruParams::uniform(d, d, rng);
    return p;
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out{&fc1_w, &fc1_b, &fc2_w, &fc2_b};
    for (Tensor* t : gru.tensors()) out.push_back(t);
    return out;
  }
  std::vector<const Tensor*> tensors() const {
    std::vector<const Tensor*> out{&fc1_w, &fc1_b, &fc2_w, &fc2_b};
    for (const Tensor* t : gru.tensors()) out.push_back(t);
    return out;
  }
  static std::vector<std::string> tensor_names() {
    std::vector<std::string> out{"fc1_w", "fc1_b", "fc2_w", "fc2_b"};
    for (const auto& n : ad::GruParams::tensor_names()) out.push_back("gru." + n);
    return out;
  }
};

/// One dialog round as a graph: node 0 the caption, 1..t−1 the history, node
/// t the unobserved query. `normalized` row i holds the incoming weights of
/// receiver i; both matrices are undefined until the first M-step.
struct DialogGraph {
  std::size_t round = 0;
  std::vector<Tensor> states;
  std::vector<bool> observed;
  std::vector<std::string> labels;
  Tensor raw;
  Tensor normalized;
  // Link features of observed nodes, reused across outer iterations.
  std::vector<Tensor> link_cache;

  std::size_t size() const { return states.size(); }
  std::size_t query() const { return round; }
  bool has_weights() const { return normalized.defined(); }

  static DialogGraph make(std::vector<Tensor> states, std::vector<std::string> labels = {}) {
    if (states.size() < 2) {
      throw DimensionError("dialog graph: need at least 2 nodes, got " +
                           std::to_string(states.size()));
    }
    DialogGraph g;
    g.round = states.size() - 1;
    g.observed.assign(states.size(), true);
    g.observed.back() = false;
    if (labels.empty()) {
      labels.push_back("caption");
      for (std::size_t k = 1; k < g.round; ++k) labels.push_back("round " + std::to_string(k));
      labels.push_back("query");
    }
    if (labels.size() != states.size()) {
      throw DimensionError("dialog graph: " + std::to_string(labels.size()) + " labels for " +
                           std::to_string(states.size()) + " nodes");
    }
    g.states = std::move(states);
    g.labels = std::move(labels);
    return g;
  }
};

inline Tensor link_features(Tape& tape, const Tensor& h, const GnnParams& p) {
  const Tensor a = ad::relu(tape, ad::linear(tape, h, p.fc1_w, p.fc1_b));
  return ad::linear(tape, a, p.fc2_w, p.fc2_b);
}

/// M-step: raw w_ij = ⟨fc(h_i), fc(h_j)⟩, then a softmax over each receiver's
/// incoming edges.
inline void link_weights(Tape& tape, DialogGraph& g, const GnnParams& p) {
  g.link_cache.resize(g.size());
  std::vector<Tensor> f(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.observed[i]) {
      if (!g.link_cache[i].defined()) g.link_cache[i] = link_features(tape, g.states[i], p);
      f[i] = g.link_cache[i];
    } else {
      f[i] = link_features(tape, g.states[i], p);
    }
  }
  g.raw = ad::pairwise_dots(tape, f);
  g.normalized = ad::masked_row_softmax(tape, g.raw);
}

/// Uniform incoming weights 1/(N−1); the raw matrix is zero.
inline void constant_weights(DialogGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> w(n * n, 1.0 / static_cast<double>(n - 1));
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 0.0;
  g.raw = Tensor::zeros({n, n});
  g.normalized = Tensor({n, n}, std::move(w));
}

/// m_i = Σ_{j≠i} ŵ_ij h_j for every unobserved node; observed slots are left
/// undefined.
inline std::vector<Tensor> aggregate_messages(Tape& tape, const DialogGraph& g) {
  if (!g.has_weights()) throw DimensionError("aggregate_messages: graph has no edge weights");
  std::vector<Tensor> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.observed[i]) continue;
    std::vector<Tensor> nb;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (j != i) nb.push_back(g.states[j]);
    }
    out[i] = ad::weighted_sum(tape, ad::row_without_diagonal(tape, g.normalized, i), nb);
  }
  return out;
}

/// S synchronous rounds of aggregate → GRU on the unobserved nodes.
inline void update_states(Tape& tape, DialogGraph& g, const GnnParams& p, std::size_t steps) {
  for (std::size_t s = 0; s < steps; ++s) {
    const auto m = aggregate_messages(tape, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.observed[i]) g.states[i] = ad::gru_cell(tape, g.states[i], m[i], p.gru);
    }
  }
}

struct InferOptions {
  std::size_t outer_iters = 3;
  std::size_t inner_steps = 2;
  /// Skip the link function and use uniform incoming weights.
  bool constant_graph = false;
};

/// Alternates the M-step (edge weights) and the E-step (S message-passing
/// updates of the unobserved node) `outer_iters` times.
inline void em_infer(Tape& tape, DialogGraph& g, const GnnParams& p, const InferOptions& opts) {
  for (std::size_t it = 0; it < opts.outer_iters; ++it) {
    if (opts.constant_graph) {
      constant_weights(g);
    } else {
      link_weights(tape, g, p);
    }
    update_states(tape, g, p, opts.inner_steps);
  }
}

struct OptionScores {
  Tensor scores;
  std::vector<double> probabilities;
};

inline OptionScores score_options(Tape& tape, const Tensor& h, const std::vector<Tensor>& options) {
  OptionScores s;
  s.scores = ad::inner_products(tape, h, options);
  s.probabilities = ad::softmax_values(s.scores.values());
  return s;
}

/// Option indices by descending score; equal scores keep index order.
inline std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// 1-based rank of option `gt`; a competitor with an equal score and a lower
/// index ranks ahead.
inline std::size_t rank_of(std::span<const double> scores, std::size_t gt) {
  if (gt >= scores.size()) {
    throw DimensionError("rank_of: index " + std::to_string(gt) + " out of " +
                         std::to_string(scores.size()));
  }
  std::size_t rank = 1;
  for (std::size_t o = 0; o < scores.size(); ++o) {
    if (scores[o] > scores[gt] || (o < gt && scores[o] == scores[gt])) ++rank;
  }
  return rank;
}

}  // namespace emgnn::gnn
