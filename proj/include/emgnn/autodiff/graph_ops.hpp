#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "emgnn/autodiff/ops.hpp"

namespace emgnn::ad {

namespace detail {

inline void require_same_vectors(const std::vector<Tensor>& xs, const char* op) {
  if (xs.empty()) throw DimensionError(std::string(op) + ": empty input list");
  for (const auto& x : xs) {
    require_vector(x, op, "element");
    if (x.size() != xs.front().size()) {
      throw DimensionError(std::string(op) + ": element " + shape_str(x.shape()) +
                           " vs " + shape_str(xs.front().shape()));
    }
  }
}

}  // namespace detail

/// N×N matrix of inner products ⟨f_i, f_j⟩ with a zero diagonal. Each pair is
/// evaluated once and written to both (i,j) and (j,i).
inline Tensor pairwise_dots(Tape& tape, const std::vector<Tensor>& f) {
  detail::require_same_vectors(f, "pairwise_dots");
  const std::size_t n = f.size(), k = f.front().size();
  std::vector<double> y(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += f[i][c] * f[j][c];
      y[i * n + j] = s;
      y[j * n + i] = s;
    }
  }
  std::vector<Node*> nodes;
  for (const auto& t : f) nodes.push_back(&t.node());
  return tape.record({n, n}, std::move(y), f, [nodes = std::move(nodes), n, k](Node& out) {
    const double* g = out.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      double* gi = grad_of(*nodes[i]);
      if (!gi) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = g[i * n + j] + g[j * n + i];
        const double* fj = nodes[j]->value.data();
        for (std::size_t c = 0; c < k; ++c) gi[c] += w * fj[c];
      }
    }
  });
}

/// Row-wise softmax over the off-diagonal entries of a square matrix; the
/// diagonal of the result is 0.
inline Tensor masked_row_softmax(Tape& tape, const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != x.dim(1)) {
    throw DimensionError("masked_row_softmax: expected a square matrix, got " +
                         shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0);
  std::vector<double> y(n * n, 0.0);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(x[i * n + j]);
    }
    if (row.empty()) continue;
    const auto p = softmax_values(row);
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) y[i * n + j] = p[k++];
    }
  }
  Node* xn = &x.node();
  return tape.record({n, n}, std::move(y), {x}, [xn, n](Node& out) {
    double* gx = grad_of(*xn);
    if (!gx) return;
    const double* g = out.grad.data();
    const double* p = out.value.data();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) s += p[i * n + j] * g[i * n + j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) gx[i * n + j] += p[i * n + j] * (g[i * n + j] - s);
      }
    }
  });
}

/// Row i of a square matrix with the diagonal entry dropped (length N−1).
inline Tensor row_without_diagonal(Tape& tape, const Tensor& m, std::size_t i) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1) || i >= m.dim(0)) {
    throw DimensionError("row_without_diagonal: row " + std::to_string(i) + " of " +
                         shape_str(m.shape()));
  }
  const std::size_t n = m.dim(0);
  std::vector<double> y;
  y.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) y.push_back(m[i * n + j]);
  }
  Node* mn = &m.node();
  return tape.record({n - 1}, std::move(y), {m}, [mn, n, i](Node& out) {
    double* gm = grad_of(*mn);
    if (!gm) return;
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) gm[i * n + j] += out.grad[k++];
    }
  });
}

/// [⟨h, o_1⟩, …, ⟨h, o_K⟩]
inline Tensor inner_products(Tape& tape, const Tensor& h, const std::vector<Tensor>& options) {
  detail::require_vector(h, "inner_products", "query");
  detail::require_same_vectors(options, "inner_products");
  if (options.front().size() != h.size()) {
    throw DimensionError("inner_products: query " + shape_str(h.shape()) + " vs option " +
                         shape_str(options.front().shape()));
  }
  const std::size_t kk = options.size(), d = h.size();
  std::vector<double> y(kk, 0.0);
  for (std::size_t o = 0; o < kk; ++o) {
    for (std::size_t c = 0; c < d; ++c) y[o] += h[c] * options[o][c];
  }
  std::vector<Tensor> inputs = options;
  inputs.push_back(h);
  std::vector<Node*> nodes;
  for (const auto& t : options) nodes.push_back(&t.node());
  Node* hn = &h.node();
  return tape.record({kk}, std::move(y), inputs, [nodes = std::move(nodes), hn, d](Node& out) {
    double* gh = grad_of(*hn);
    for (std::size_t o = 0; o < nodes.size(); ++o) {
      const double g = out.grad[o];
      if (gh) {
        for (std::size_t c = 0; c < d; ++c) gh[c] += g * nodes[o]->value[c];
      }
      if (double* go = grad_of(*nodes[o])) {
        for (std::size_t c = 0; c < d; ++c) go[c] += g * hn->value[c];
      }
    }
  });
}

}  // namespace emgnn::ad
