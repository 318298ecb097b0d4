#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "emgnn/autodiff/tensor.hpp"

namespace emgnn::ad {

namespace detail {

inline void require_vector(const Tensor& t, const char* op, const char* what) {
  if (t.rank() != 1) {
    throw DimensionError(std::string(op) + ": " + what +
                         " must be a vector, got " + shape_str(t.shape()));
  }
}

inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// y += M x, M is rows x cols row-major.
inline void matvec_acc(const double* m, const double* x, double* y,
                       std::size_t rows, std::size_t cols) {
  std::size_t i = 0;
  // Four rows at a time; each row still sums left to right.
  for (; i + 4 <= rows; i += 4) {
    const double* r0 = m + i * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double xj = x[j];
      s0 += r0[j] * xj;
      s1 += r1[j] * xj;
      s2 += r2[j] * xj;
      s3 += r3[j] * xj;
    }
    y[i] += s0;
    y[i + 1] += s1;
    y[i + 2] += s2;
    y[i + 3] += s3;
  }
  for (; i < rows; ++i) {
    const double* row = m + i * cols;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += row[j] * x[j];
    y[i] += s;
  }
}

// y += M^T g
inline void matvec_t_acc(const double* m, const double* g, double* y,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    const double* row = m + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] += gi * row[j];
  }
}

// M += g x^T
inline void outer_acc(double* m, const double* g, const double* x,
                      std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    double* row = m + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x[j];
  }
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// y = W x + b
inline Tensor linear(Tape& tape, const Tensor& x, const Tensor& w,
                     const Tensor& b) {
  if (w.rank() != 2 || x.rank() != 1 || b.rank() != 1 ||
      w.dim(1) != x.dim(0) || w.dim(0) != b.dim(0)) {
    throw DimensionError("linear: W " + shape_str(w.shape()) + " x " +
                         shape_str(x.shape()) + " + b " +
                         shape_str(b.shape()) + " do not conform");
  }
  const std::size_t m = w.dim(0), n = w.dim(1);
  std::vector<double> y(b.values().begin(), b.values().end());
  detail::matvec_acc(w.values().data(), x.values().data(), y.data(), m, n);
  Node* xn = &x.node();
  Node* wn = &w.node();
  Node* bn = &b.node();
  return tape.record({m}, std::move(y), {x, w, b}, [=](Node& out) {
    const double* g = out.grad.data();
    if (double* gx = grad_of(*xn)) detail::matvec_t_acc(wn->value.data(), g, gx, m, n);
    if (double* gw = grad_of(*wn)) detail::outer_acc(gw, g, xn->value.data(), m, n);
    if (double* gb = grad_of(*bn)) {
      for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
    }
  });
}

/// Elementwise max(0, x); the subgradient at 0 is 0.
inline Tensor relu(Tape& tape, const Tensor& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool active = x[i] > 0.0;
    tape.note_branch(active);
    y[i] = active ? x[i] : 0.0;
  }
  Node* xn = &x.node();
  return tape.record(x.shape(), std::move(y), {x}, [=](Node& out) {
    if (double* gx = grad_of(*xn)) {
      for (std::size_t i = 0; i < out.value.size(); ++i) {
        if (xn->value[i] > 0.0) gx[i] += out.grad[i];
      }
    }
  });
}

inline Tensor sigmoid(Tape& tape, const Tensor& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = detail::stable_sigmoid(x[i]);
  Node* xn = &x.node();
  return tape.record(x.shape(), std::move(y), {x}, [=](Node& out) {
    if (double* gx = grad_of(*xn)) {
      for (std::size_t i = 0; i < out.value.size(); ++i) {
        const double s = out.value[i];
        gx[i] += out.grad[i] * s * (1.0 - s);
      }
    }
  });
}

inline Tensor tanh(Tape& tape, const Tensor& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
  Node* xn = &x.node();
  return tape.record(x.shape(), std::move(y), {x}, [=](Node& out) {
    if (double* gx = grad_of(*xn)) {
      for (std::size_t i = 0; i < out.value.size(); ++i) {
        const double t = out.value[i];
        gx[i] += out.grad[i] * (1.0 - t * t);
      }
    }
  });
}

/// Plain softmax of a value span, max-subtracted.
inline std::vector<double> softmax_values(std::span<const double> x) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    z += y[i];
  }
  for (auto& v : y) v /= z;
  return y;
}

inline Tensor softmax(Tape& tape, const Tensor& x) {
  detail::require_vector(x, "softmax", "input");
  if (x.size() == 0) throw DimensionError("softmax: empty input");
  Node* xn = &x.node();
  return tape.record(x.shape(), softmax_values(x.values()), {x}, [=](Node& out) {
    if (double* gx = grad_of(*xn)) {
      double inner = 0.0;
      for (std::size_t i = 0; i < out.value.size(); ++i) {
        inner += out.grad[i] * out.value[i];
      }
      for (std::size_t i = 0; i < out.value.size(); ++i) {
        gx[i] += out.value[i] * (out.grad[i] - inner);
      }
    }
  });
}

inline Tensor dot(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_vector(a, "dot", "lhs");
  detail::require_vector(b, "dot", "rhs");
  if (a.size() != b.size()) {
    throw DimensionError("dot: length mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  Node* an = &a.node();
  Node* bn = &b.node();
  return tape.record({}, {s}, {a, b}, [=](Node& out) {
    const double g = out.grad[0];
    const std::size_t n = an->value.size();
    // a and b may be the same node; both contributions land additively.
    if (double* ga = grad_of(*an)) {
      for (std::size_t i = 0; i < n; ++i) ga[i] += g * bn->value[i];
    }
    if (double* gb = grad_of(*bn)) {
      for (std::size_t i = 0; i < n; ++i) gb[i] += g * an->value[i];
    }
  });
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same(a, b, "add");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  Node* an = &a.node();
  Node* bn = &b.node();
  return tape.record(a.shape(), std::move(y), {a, b}, [=](Node& out) {
    for (Node* n : {an, bn}) {
      if (double* g = grad_of(*n)) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
      }
    }
  });
}

inline Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same(a, b, "sub");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  Node* an = &a.node();
  Node* bn = &b.node();
  return tape.record(a.shape(), std::move(y), {a, b}, [=](Node& out) {
    if (double* g = grad_of(*an)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
    if (double* g = grad_of(*bn)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] -= out.grad[i];
    }
  });
}

/// Elementwise product.
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same(a, b, "mul");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  Node* an = &a.node();
  Node* bn = &b.node();
  return tape.record(a.shape(), std::move(y), {a, b}, [=](Node& out) {
    if (double* g = grad_of(*an)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * bn->value[i];
    }
    if (double* g = grad_of(*bn)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * an->value[i];
    }
  });
}

inline Tensor scale(Tape& tape, const Tensor& a, double s) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * a[i];
  Node* an = &a.node();
  return tape.record(a.shape(), std::move(y), {a}, [=](Node& out) {
    if (double* g = grad_of(*an)) {
      for (std::size_t i = 0; i < out.grad.size(); ++i) g[i] += s * out.grad[i];
    }
  });
}

inline Tensor sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Node* an = &a.node();
  return tape.record({}, {s}, {a}, [=](Node& out) {
    if (double* g = grad_of(*an)) {
      for (std::size_t i = 0; i < an->value.size(); ++i) g[i] += out.grad[0];
    }
  });
}

/// Joins vectors (or scalars) end to end into one vector.
inline Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  std::vector<double> y;
  std::vector<std::size_t> offsets;
  std::vector<Node*> nodes;
  for (const auto& p : parts) {
    if (p.rank() > 1) {
      throw DimensionError("concat: part " + shape_str(p.shape()) +
                           " is not a vector or scalar");
    }
    offsets.push_back(y.size());
    nodes.push_back(&p.node());
    y.insert(y.end(), p.values().begin(), p.values().end());
  }
  const std::size_t n = y.size();
  return tape.record({n}, std::move(y), parts,
                     [nodes = std::move(nodes), offsets = std::move(offsets)](Node& out) {
                       for (std::size_t k = 0; k < nodes.size(); ++k) {
                         if (double* g = grad_of(*nodes[k])) {
                           for (std::size_t i = 0; i < nodes[k]->value.size(); ++i) {
                             g[i] += out.grad[offsets[k] + i];
                           }
                         }
                       }
                     });
}

/// Σ_k weights[k] · vectors[k]
inline Tensor weighted_sum(Tape& tape, const Tensor& weights,
                           const std::vector<Tensor>& vectors) {
  detail::require_vector(weights, "weighted_sum", "weights");
  if (weights.size() != vectors.size() || vectors.empty()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) +
                         " weights for " + std::to_string(vectors.size()) +
                         " vectors");
  }
  const std::size_t d = vectors.front().size();
  std::vector<double> y(d, 0.0);
  std::vector<Node*> nodes;
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    if (vectors[k].shape() != vectors.front().shape()) {
      throw DimensionError("weighted_sum: vector " +
                           shape_str(vectors[k].shape()) + " vs " +
                           shape_str(vectors.front().shape()));
    }
    nodes.push_back(&vectors[k].node());
    const double w = weights[k];
    for (std::size_t i = 0; i < d; ++i) y[i] += w * vectors[k][i];
  }
  std::vector<Tensor> inputs = vectors;
  inputs.push_back(weights);
  Node* wn = &weights.node();
  return tape.record(vectors.front().shape(), std::move(y), inputs,
                     [nodes = std::move(nodes), wn, d](Node& out) {
                       double* gw = grad_of(*wn);
                       for (std::size_t k = 0; k < nodes.size(); ++k) {
                         const Node& v = *nodes[k];
                         if (gw) {
                           double s = 0.0;
                           for (std::size_t i = 0; i < d; ++i) s += out.grad[i] * v.value[i];
                           gw[k] += s;
                         }
                         if (double* gv = grad_of(*nodes[k])) {
                           const double w = wn->value[k];
                           for (std::size_t i = 0; i < d; ++i) gv[i] += w * out.grad[i];
                         }
                       }
                     });
}

/// Row `index` of an embedding table. Row 0 is the padding row: it is never
/// written by backward and stays at whatever value it was created with.
inline Tensor embedding(Tape& tape, const Tensor& table, std::size_t index) {
  if (table.rank() != 2) {
    throw DimensionError("embedding: table must be a matrix, got " +
                         shape_str(table.shape()));
  }
  if (index >= table.dim(0)) {
    throw DimensionError("embedding: id " + std::to_string(index) +
                         " out of range for " + std::to_string(table.dim(0)) +
                         " rows");
  }
  const std::size_t e = table.dim(1);
  const auto row = table.values().subspan(index * e, e);
  Node* tn = &table.node();
  return tape.record({e}, std::vector<double>(row.begin(), row.end()), {table},
                     [=](Node& out) {
                       if (index == 0) return;
                       if (double* g = grad_of(*tn)) {
                         for (std::size_t i = 0; i < e; ++i) g[index * e + i] += out.grad[i];
                       }
                     });
}

/// −log softmax(logits)[target] in log-sum-exp form.
inline Tensor cross_entropy(Tape& tape, const Tensor& logits,
                            std::size_t target) {
  detail::require_vector(logits, "cross_entropy", "logits");
  if (target >= logits.size()) {
    throw DimensionError("cross_entropy: target " + std::to_string(target) +
                         " out of range for " + std::to_string(logits.size()) +
                         " classes");
  }
  const auto x = logits.values();
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double loss = mx + std::log(z) - x[target];
  Node* ln = &logits.node();
  return tape.record({}, {loss}, {logits}, [=](Node& out) {
    if (double* g = grad_of(*ln)) {
      const auto p = softmax_values(ln->value);
      for (std::size_t i = 0; i < p.size(); ++i) {
        g[i] += out.grad[0] * (p[i] - (i == target ? 1.0 : 0.0));
      }
    }
  });
}

}  // namespace emgnn::ad
