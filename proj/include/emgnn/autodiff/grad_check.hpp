#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "emgnn/autodiff/tensor.hpp"

namespace emgnn::ad {

struct GradCheckOptions {
  double step = 1e-5;
  /// Lower bound of the relative-error denominator.
  double floor = 1e-8;
  /// Optional per-coordinate exclusion, e.g. a band around a known kink.
  std::function<bool(std::size_t input, std::size_t coord)> skip;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
  std::size_t checked = 0;
  /// Coordinates whose perturbation crossed a ReLU kink or matched `skip`.
  std::size_t masked = 0;
  bool finite = true;
  std::size_t nonfinite_input = 0;
  std::size_t nonfinite_coord = 0;

  bool passed(double tol) const { return finite && max_relative_error < tol; }
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences at every coordinate of every input.
///
/// The error per coordinate is |analytic − numeric| / max(floor, |analytic| +
/// |numeric|) with floor 1e-8 by default. A coordinate is left out when either
/// perturbed evaluation took a different ReLU branch than the base point,
/// since the function is not differentiable there.
inline GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f,
                                  std::vector<Tensor> inputs,
                                  const GradCheckOptions& opts = {}) {
  GradCheckResult res;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  std::uint64_t base_signature = 0;
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    base_signature = tape.kink_signature();
    if (!std::isfinite(loss.item())) {
      res.finite = false;
      return res;
    }
    tape.backward(loss);
    for (auto& t : inputs) {
      analytic.emplace_back(t.size(), 0.0);
      if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.back().begin());
      t.zero_grad();
    }
  }

  auto evaluate = [&](std::uint64_t& signature) {
    Tape tape;
    const double v = f(tape).item();
    signature = tape.kink_signature();
    return v;
  };

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (opts.skip && opts.skip(k, i)) {
        ++res.masked;
        continue;
      }
      const double saved = values[i];
      std::uint64_t sig_plus = 0, sig_minus = 0;
      values[i] = saved + opts.step;
      const double f_plus = evaluate(sig_plus);
      values[i] = saved - opts.step;
      const double f_minus = evaluate(sig_minus);
      values[i] = saved;

      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        res.finite = false;
        res.nonfinite_input = k;
        res.nonfinite_coord = i;
        return res;
      }
      if (sig_plus != base_signature || sig_minus != base_signature) {
        ++res.masked;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * opts.step);
      const double a = analytic[k][i];
      const double err =
          std::abs(a - numeric) / std::max(opts.floor, std::abs(a) + std::abs(numeric));
      ++res.checked;
      if (err > res.max_relative_error) {
        res.max_relative_error = err;
        res.worst_input = k;
        res.worst_coord = i;
      }
    }
  }
  return res;
}

}  // namespace emgnn::ad
