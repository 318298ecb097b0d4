#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "emgnn/autodiff/tensor.hpp"

namespace emgnn::train {

using ad::Tensor;

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr_base = 1e-3;
  double lr_floor = 5e-5;
  /// Steps over which the rate falls linearly from lr_base to lr_floor.
  std::size_t decay_steps = 1;
};

struct OptimizerState {
  AdamOptions opts;
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;

  double learning_rate() const {
    if (opts.decay_steps <= 1) return opts.lr_base;
    const double f = std::min(1.0, static_cast<double>(step) / static_cast<double>(opts.decay_steps - 1));
    return opts.lr_base + (opts.lr_floor - opts.lr_base) * f;
  }
};

inline OptimizerState make_optimizer(const std::vector<Tensor*>& params, const AdamOptions& opts) {
  OptimizerState st;
  st.opts = opts;
  for (const Tensor* p : params) {
    st.m.emplace_back(p->size(), 0.0);
    st.v.emplace_back(p->size(), 0.0);
  }
  return st;
}

/// One bias-corrected Adam update. A parameter without a gradient counts as
/// a zero gradient. Returns false, changing nothing, if any gradient is
/// non-finite.
inline bool adam_step(const std::vector<Tensor*>& params, OptimizerState& st) {
  if (params.size() != st.m.size()) throw DimensionError("adam_step: parameter count changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->size() != st.m[k].size()) throw DimensionError("adam_step: parameter shape changed");
    for (double g : params[k]->grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  const double lr = st.learning_rate();
  ++st.step;
  const auto& o = st.opts;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    if (!p.has_grad()) {
      // A zero gradient only decays the moments.
      for (std::size_t i = 0; i < p.size(); ++i) {
        st.m[k][i] *= o.beta1;
        st.v[k][i] *= o.beta2;
        if (st.m[k][i] != 0.0) p.mutable_values()[i] -= lr * (st.m[k][i] / c1) / (std::sqrt(st.v[k][i] / c2) + o.eps);
      }
      continue;
    }
    auto w = p.mutable_values();
    const auto g = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      st.m[k][i] = o.beta1 * st.m[k][i] + (1.0 - o.beta1) * g[i];
      st.v[k][i] = o.beta2 * st.v[k][i] + (1.0 - o.beta2) * g[i] * g[i];
      w[i] -= lr * (st.m[k][i] / c1) / (std::sqrt(st.v[k][i] / c2) + o.eps);
    }
  }
  return true;
}

}  // namespace emgnn::train
