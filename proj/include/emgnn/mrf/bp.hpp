#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "emgnn/mrf/model.hpp"

namespace emgnn::mrf {

struct BpOptions {
  std::size_t max_iters = 50;
  double tol = 1e-10;
  /// Rescale every message to max 1 after each update.
  bool normalize = true;
};

struct BpResult {
  /// Per-node max-marginal beliefs normalized to sum 1. Observed nodes carry
  /// an indicator on their observed state.
  std::vector<std::vector<double>> beliefs;
  Assignment assignment;
  bool converged = false;
  std::size_t iterations = 0;
  double max_delta = 0.0;
};

namespace detail {

/// Index of the largest entry; entries within a relative 1e-12 of the
/// maximum count as ties and the lowest index wins.
inline std::size_t argmax_lowest(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] >= mx - 1e-12 * std::abs(mx)) return k;
  }
  return 0;
}

}  // namespace detail

/// Max-product belief propagation with observed nodes clamped.
///
/// Factors are exp(−w_i φ_u) and exp(−w_ij φ_p), matching the energy form of
/// the model. Messages are only kept for edges into unobserved nodes; a
/// message from an observed sender is its clamped pairwise factor, and a
/// message from an unobserved sender maximizes over the sender's states
/// including its own unary factor. All messages update synchronously from
/// the previous iterate.
inline BpResult max_product_bp(const DiscreteMrf& mrf, const Assignment& observed,
                               const BpOptions& opts = {}) {
  check_assignment(mrf, observed);
  const std::size_t n = mrf.size();
  const auto& edges = mrf.edges();

  // Directed message slots: msg[2e] flows i->j, msg[2e+1] flows j->i.
  auto slot = [](std::size_t e, bool from_i) { return 2 * e + (from_i ? 0 : 1); };
  std::vector<std::vector<double>> msg(2 * edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    msg[slot(e, true)].assign(mrf.cardinality(edges[e].j), 1.0);
    msg[slot(e, false)].assign(mrf.cardinality(edges[e].i), 1.0);
  }

  auto unary_factor = [&](std::size_t i, std::size_t s) {
    return std::exp(-mrf.node_weight(i) * mrf.unary(i)[s]);
  };
  auto pair_factor = [&](std::size_t e, std::size_t a, std::size_t sa, std::size_t sb) {
    return std::exp(-mrf.weight_of(edges[e]) * edges[e].energy(a, sa, sb));
  };
  auto normalize = [&](std::vector<double>& m) {
    if (!opts.normalize) return;
    const double mx = *std::max_element(m.begin(), m.end());
    if (mx > 0.0) {
      for (double& v : m) v /= mx;
    }
  };

  // Messages from observed senders never change.
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (bool from_i : {true, false}) {
      const std::size_t src = from_i ? edges[e].i : edges[e].j;
      const std::size_t dst = from_i ? edges[e].j : edges[e].i;
      if (!observed.observed[src] || observed.observed[dst]) continue;
      auto& m = msg[slot(e, from_i)];
      for (std::size_t s = 0; s < m.size(); ++s) {
        m[s] = pair_factor(e, dst, s, observed.states[src]);
      }
      normalize(m);
    }
  }

  BpResult res;
  std::vector<std::vector<double>> next = msg;
  for (res.iterations = 1; res.iterations <= opts.max_iters; ++res.iterations) {
    double delta = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      for (bool from_i : {true, false}) {
        const std::size_t src = from_i ? edges[e].i : edges[e].j;
        const std::size_t dst = from_i ? edges[e].j : edges[e].i;
        if (observed.observed[src] || observed.observed[dst]) continue;
        auto& out = next[slot(e, from_i)];
        for (std::size_t sd = 0; sd < out.size(); ++sd) {
          double best = 0.0;
          for (std::size_t ss = 0; ss < mrf.cardinality(src); ++ss) {
            double v = unary_factor(src, ss) * pair_factor(e, dst, sd, ss);
            for (const auto& nb : mrf.neighbors(src)) {
              if (nb.edge == e) continue;
              const bool nb_is_i = edges[nb.edge].i == nb.node;
              v *= msg[slot(nb.edge, nb_is_i)][ss];
            }
            best = std::max(best, v);
          }
          out[sd] = best;
        }
        normalize(out);
        for (std::size_t s = 0; s < out.size(); ++s) {
          delta = std::max(delta, std::abs(out[s] - msg[slot(e, from_i)][s]));
        }
      }
    }
    msg = next;
    res.max_delta = delta;
    if (delta < opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, opts.max_iters);

  res.assignment = observed;
  res.beliefs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& b = res.beliefs[i];
    b.assign(mrf.cardinality(i), 0.0);
    if (observed.observed[i]) {
      b[observed.states[i]] = 1.0;
      continue;
    }
    for (std::size_t s = 0; s < b.size(); ++s) {
      double v = unary_factor(i, s);
      for (const auto& nb : mrf.neighbors(i)) {
        const bool nb_is_i = edges[nb.edge].i == nb.node;
        v *= msg[slot(nb.edge, nb_is_i)][s];
      }
      b[s] = v;
    }
    double z = 0.0;
    for (double v : b) z += v;
    if (z > 0.0) {
      for (double& v : b) v /= z;
    }
    res.assignment.states[i] = detail::argmax_lowest(b);
  }
  return res;
}

}  // namespace emgnn::mrf
