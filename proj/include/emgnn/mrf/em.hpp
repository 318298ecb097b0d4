#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "emgnn/mrf/bp.hpp"
#include "emgnn/mrf/bruteforce.hpp"
#include "emgnn/mrf/model.hpp"

namespace emgnn::mrf {

struct MStepOptions {
  std::size_t steps = 50;
  double lr = 0.5;
  /// Fit the unary weights w_i too; when false they stay where they are.
  bool fit_node_weights = true;
  /// Halvings tried before a step is abandoned.
  std::size_t max_halvings = 40;
};

struct MStepResult {
  DiscreteMrf model;
  /// Mean log-likelihood of the data before the first step and after each.
  std::vector<double> log_likelihood;
};

/// Mean log p(v | W) over a set of full state vectors.
inline double mean_log_likelihood(const DiscreteMrf& mrf,
                                  std::span<const std::vector<std::size_t>> data) {
  const double log_z = log_partition(mrf);
  double total = 0.0;
  for (const auto& s : data) total += -energy(mrf, s) - log_z;
  return total / static_cast<double>(data.size());
}

/// Projected gradient ascent on the mean log-likelihood over the weights:
///   ∂/∂w_ij = −φ_p(v_i*, v_j*) + E_{p(v|W)}[φ_p(v_i, v_j)]
/// (likewise for w_i), expectations by enumeration, weights projected to
/// [0, 1] after every step. A step that lowers the objective is retried with
/// half the learning rate, so the objective never decreases.
inline MStepResult mstep_weights(const DiscreteMrf& mrf,
                                 std::span<const std::vector<std::size_t>> data,
                                 const MStepOptions& opts = {}) {
  if (data.empty()) throw DimensionError("mstep: no data");
  for (const auto& s : data) {
    if (s.size() != mrf.size()) {
      throw DimensionError("mstep: data row covers " + std::to_string(s.size()) +
                           " nodes, model has " + std::to_string(mrf.size()));
    }
  }
  MStepResult res{mrf, {}};
  const double count = static_cast<double>(data.size());
  double current = mean_log_likelihood(res.model, data);
  res.log_likelihood.push_back(current);

  for (std::size_t step = 0; step < opts.steps; ++step) {
    const auto ex = expected_potentials(res.model);
    std::vector<double> g_edge(ex.edge);
    std::vector<double> g_node(ex.node);
    for (const auto& s : data) {
      for (std::size_t e = 0; e < res.model.edges().size(); ++e) {
        const auto& t = res.model.edges()[e];
        g_edge[e] -= t.at(s[t.i], s[t.j]) / count;
      }
      for (std::size_t i = 0; i < res.model.size(); ++i) {
        g_node[i] -= res.model.unary(i)[s[i]] / count;
      }
    }

    double lr = opts.lr;
    bool accepted = false;
    for (std::size_t h = 0; h <= opts.max_halvings; ++h, lr *= 0.5) {
      DiscreteMrf trial = res.model;
      for (std::size_t e = 0; e < trial.edges().size(); ++e) {
        const auto& t = trial.edges()[e];
        trial.set_edge_weight(t.i, t.j, trial.weight_of(t) + lr * g_edge[e]);
      }
      if (opts.fit_node_weights) {
        for (std::size_t i = 0; i < trial.size(); ++i) {
          trial.set_node_weight(i, trial.node_weight(i) + lr * g_node[i]);
        }
      }
      const double ll = mean_log_likelihood(trial, data);
      if (ll >= current) {
        res.model = std::move(trial);
        current = ll;
        accepted = true;
        break;
      }
    }
    res.log_likelihood.push_back(current);
    if (!accepted) break;
  }
  return res;
}

inline MStepResult mstep_weights(const DiscreteMrf& mrf, const Assignment& completed,
                                 const MStepOptions& opts = {}) {
  const std::vector<std::vector<std::size_t>> data{completed.states};
  return mstep_weights(mrf, data, opts);
}

struct EmOptions {
  std::size_t outer_iters = 10;
  BpOptions bp;
  MStepOptions mstep;
};

struct EmResult {
  DiscreteMrf model;
  Assignment completion;
  /// log p(x, z* | W) after every M-step.
  std::vector<double> objective;
};

/// Alternates a max-product E-step over the unobserved nodes with a
/// likelihood M-step over the weights. From the second iteration on, a BP
/// completion that scores below the incumbent under the current weights is
/// discarded, which keeps the surrogate objective monotone on loopy graphs
/// where BP is not exact.
inline EmResult em_fit(const DiscreteMrf& mrf, const Assignment& observed,
                       const EmOptions& opts = {}) {
  if (opts.outer_iters == 0) throw DimensionError("em_fit: outer_iters must be >= 1");
  EmResult res{mrf, observed, {}};
  bool have_incumbent = false;
  for (std::size_t it = 0; it < opts.outer_iters; ++it) {
    Assignment z = max_product_bp(res.model, observed, opts.bp).assignment;
    if (have_incumbent &&
        log_likelihood(res.model, z.states) < log_likelihood(res.model, res.completion.states)) {
      z = res.completion;
    }
    res.completion = std::move(z);
    have_incumbent = true;
    auto m = mstep_weights(res.model, res.completion, opts.mstep);
    res.model = std::move(m.model);
    res.objective.push_back(m.log_likelihood.back());
  }
  return res;
}

}  // namespace emgnn::mrf
