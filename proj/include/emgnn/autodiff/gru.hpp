#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "emgnn/autodiff/ops.hpp"
#include "emgnn/rng.hpp"

namespace emgnn::ad {

/// Weights of one gated recurrent unit with input size `in` and state size
/// `d`. W_* act on the input, U_* on the previous state.
struct GruParams {
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_h, u_h, b_h;

  std::size_t state_dim() const { return b_z.size(); }
  std::size_t input_dim() const { return w_z.dim(1); }

  static GruParams zeros(std::size_t in, std::size_t d) {
    GruParams p;
    for (auto* w : {&p.w_z, &p.w_r, &p.w_h}) *w = Tensor::zeros({d, in}, true);
    for (auto* u : {&p.u_z, &p.u_r, &p.u_h}) *u = Tensor::zeros({d, d}, true);
    for (auto* b : {&p.b_z, &p.b_r, &p.b_h}) *b = Tensor::zeros({d}, true);
    return p;
  }

  /// Uniform in [-1/sqrt(d), 1/sqrt(d)].
  static GruParams uniform(std::size_t in, std::size_t d, Rng& rng) {
    GruParams p = zeros(in, d);
    const double a = 1.0 / std::sqrt(static_cast<double>(d));
    for (Tensor* t : p.tensors()) {
      for (double& v : t->mutable_values()) v = rng.uniform(-a, a);
    }
    return p;
  }

  std::vector<Tensor*> tensors() {
    return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h};
  }
  std::vector<const Tensor*> tensors() const {
    return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h};
  }

  static std::vector<std::string> tensor_names() {
    return {"w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"};
  }
};

/// One GRU step with reset applied before the candidate transform:
///   z  = σ(W_z m + U_z h + b_z)
///   r  = σ(W_r m + U_r h + b_r)
///   h~ = tanh(W_h m + U_h (r⊙h) + b_h)
///   h' = (1−z)⊙h + z⊙h~
/// Forward and backward are fused into a single tape record.
inline Tensor gru_cell(Tape& tape, const Tensor& h, const Tensor& m,
                       const GruParams& p) {
  const std::size_t d = p.state_dim();
  const std::size_t in = p.input_dim();
  if (h.rank() != 1 || h.size() != d || m.rank() != 1 || m.size() != in ||
      p.u_z.dim(0) != d || p.u_z.dim(1) != d) {
    throw DimensionError("gru_cell: state " + shape_str(h.shape()) +
                         ", input " + shape_str(m.shape()) +
                         " do not match params (in=" + std::to_string(in) +
                         ", d=" + std::to_string(d) + ")");
  }
  using detail::matvec_acc;
  const double* hv = h.values().data();
  const double* mv = m.values().data();

  std::vector<double> z(p.b_z.values().begin(), p.b_z.values().end());
  std::vector<double> r(p.b_r.values().begin(), p.b_r.values().end());
  std::vector<double> c(p.b_h.values().begin(), p.b_h.values().end());
  matvec_acc(p.w_z.values().data(), mv, z.data(), d, in);
  matvec_acc(p.u_z.values().data(), hv, z.data(), d, d);
  matvec_acc(p.w_r.values().data(), mv, r.data(), d, in);
  matvec_acc(p.u_r.values().data(), hv, r.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) {
    z[i] = detail::stable_sigmoid(z[i]);
    r[i] = detail::stable_sigmoid(r[i]);
  }
  std::vector<double> rh(d);
  for (std::size_t i = 0; i < d; ++i) rh[i] = r[i] * hv[i];
  matvec_acc(p.w_h.values().data(), mv, c.data(), d, in);
  matvec_acc(p.u_h.values().data(), rh.data(), c.data(), d, d);
  for (auto& v : c) v = std::tanh(v);

  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = (1.0 - z[i]) * hv[i] + z[i] * c[i];

  std::vector<Tensor> inputs{h, m};
  for (const Tensor* t : p.tensors()) inputs.push_back(*t);
  std::vector<Node*> pn;
  for (const Tensor* t : p.tensors()) pn.push_back(&t->node());
  Node* hn = &h.node();
  Node* mn = &m.node();

  return tape.record(
      {d}, std::move(out), inputs,
      [=, z = std::move(z), r = std::move(r), c = std::move(c),
       rh = std::move(rh), pn = std::move(pn)](Node& o) {
        using detail::matvec_t_acc;
        using detail::outer_acc;
        Node &wz = *pn[0], &uz = *pn[1], &bz = *pn[2];
        Node &wr = *pn[3], &ur = *pn[4], &br = *pn[5];
        Node &wh = *pn[6], &uh = *pn[7], &bh = *pn[8];
        const double* g = o.grad.data();
        const double* hv = hn->value.data();
        const double* mv = mn->value.data();

        std::vector<double> da_z(d), da_h(d), da_r(d), dh(d, 0.0), dm(in, 0.0),
            drh(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
          const double dz = g[i] * (c[i] - hv[i]);
          da_z[i] = dz * z[i] * (1.0 - z[i]);
          da_h[i] = g[i] * z[i] * (1.0 - c[i] * c[i]);
          dh[i] = g[i] * (1.0 - z[i]);
        }
        matvec_t_acc(uh.value.data(), da_h.data(), drh.data(), d, d);
        for (std::size_t i = 0; i < d; ++i) {
          const double dr = drh[i] * hv[i];
          dh[i] += drh[i] * r[i];
          da_r[i] = dr * r[i] * (1.0 - r[i]);
        }
        matvec_t_acc(wz.value.data(), da_z.data(), dm.data(), d, in);
        matvec_t_acc(wr.value.data(), da_r.data(), dm.data(), d, in);
        matvec_t_acc(wh.value.data(), da_h.data(), dm.data(), d, in);
        matvec_t_acc(uz.value.data(), da_z.data(), dh.data(), d, d);
        matvec_t_acc(ur.value.data(), da_r.data(), dh.data(), d, d);

        if (double* gz = grad_of(wz)) outer_acc(gz, da_z.data(), mv, d, in);
        if (double* gz = grad_of(uz)) outer_acc(gz, da_z.data(), hv, d, d);
        if (double* gr = grad_of(wr)) outer_acc(gr, da_r.data(), mv, d, in);
        if (double* gr = grad_of(ur)) outer_acc(gr, da_r.data(), hv, d, d);
        if (double* gh = grad_of(wh)) outer_acc(gh, da_h.data(), mv, d, in);
        if (double* gh = grad_of(uh)) outer_acc(gh, da_h.data(), rh.data(), d, d);
        for (auto [node, delta] : {std::pair{&bz, &da_z}, std::pair{&br, &da_r},
                                   std::pair{&bh, &da_h}}) {
          if (double* gb = grad_of(*node)) {
            for (std::size_t i = 0; i < d; ++i) gb[i] += (*delta)[i];
          }
        }
        if (double* gh = grad_of(*hn)) {
          for (std::size_t i = 0; i < d; ++i) gh[i] += dh[i];
        }
        if (double* gm = grad_of(*mn)) {
          for (std::size_t i = 0; i < in; ++i) gm[i] += dm[i];
        }
      });
}

/// Input side of a GRU step, [W_z m + b_z; W_r m + b_r; W_h m + b_h]. With
/// gru_step it computes exactly what gru_cell does, so a projection can be
/// shared by every step that reads the same input.
inline Tensor gru_input(Tape& tape, const Tensor& m, const GruParams& p) {
  const std::size_t d = p.state_dim();
  const std::size_t in = p.input_dim();
  if (m.rank() != 1 || m.size() != in) {
    throw DimensionError("gru_input: input " + shape_str(m.shape()) + " but params expect " +
                         std::to_string(in));
  }
  std::vector<double> x(3 * d);
  const Tensor* w[3] = {&p.w_z, &p.w_r, &p.w_h};
  const Tensor* b[3] = {&p.b_z, &p.b_r, &p.b_h};
  for (std::size_t k = 0; k < 3; ++k) {
    std::copy(b[k]->values().begin(), b[k]->values().end(), x.begin() + static_cast<std::ptrdiff_t>(k * d));
    detail::matvec_acc(w[k]->values().data(), m.values().data(), x.data() + k * d, d, in);
  }
  Node* mn = &m.node();
  Node* wn[3] = {&p.w_z.node(), &p.w_r.node(), &p.w_h.node()};
  Node* bn[3] = {&p.b_z.node(), &p.b_r.node(), &p.b_h.node()};
  return tape.record({3 * d}, std::move(x), {m, p.w_z, p.b_z, p.w_r, p.b_r, p.w_h, p.b_h}, [=](Node& o) {
    const double* g = o.grad.data();
    for (std::size_t k = 0; k < 3; ++k) {
      const double* gk = g + k * d;
      if (double* gm = grad_of(*mn)) detail::matvec_t_acc(wn[k]->value.data(), gk, gm, d, in);
      if (double* gw = grad_of(*wn[k])) detail::outer_acc(gw, gk, mn->value.data(), d, in);
      if (double* gb = grad_of(*bn[k])) {
        for (std::size_t i = 0; i < d; ++i) gb[i] += gk[i];
      }
    }
  });
}

/// Recurrent side of a GRU step given x = gru_input(m).
inline Tensor gru_step(Tape& tape, const Tensor& h, const Tensor& x, const GruParams& p) {
  const std::size_t d = p.state_dim();
  if (h.rank() != 1 || h.size() != d || x.rank() != 1 || x.size() != 3 * d) {
    throw DimensionError("gru_step: state " + shape_str(h.shape()) + ", projection " + shape_str(x.shape()) +
                         " do not match d=" + std::to_string(d));
  }
  using detail::matvec_acc;
  const double* hv = h.values().data();
  const double* xv = x.values().data();
  std::vector<double> z(xv, xv + d);
  std::vector<double> r(xv + d, xv + 2 * d);
  std::vector<double> c(xv + 2 * d, xv + 3 * d);
  matvec_acc(p.u_z.values().data(), hv, z.data(), d, d);
  matvec_acc(p.u_r.values().data(), hv, r.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) {
    z[i] = detail::stable_sigmoid(z[i]);
    r[i] = detail::stable_sigmoid(r[i]);
  }
  std::vector<double> rh(d);
  for (std::size_t i = 0; i < d; ++i) rh[i] = r[i] * hv[i];
  matvec_acc(p.u_h.values().data(), rh.data(), c.data(), d, d);
  for (auto& v : c) v = std::tanh(v);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = (1.0 - z[i]) * hv[i] + z[i] * c[i];

  Node* hn = &h.node();
  Node* xn = &x.node();
  Node* un[3] = {&p.u_z.node(), &p.u_r.node(), &p.u_h.node()};
  return tape.record(
      {d}, std::move(out), {h, x, p.u_z, p.u_r, p.u_h},
      [=, z = std::move(z), r = std::move(r), c = std::move(c), rh = std::move(rh)](Node& o) {
        using detail::matvec_t_acc;
        using detail::outer_acc;
        const double* g = o.grad.data();
        const double* hv = hn->value.data();
        std::vector<double> da(3 * d), dh(d, 0.0), drh(d, 0.0);
        double* da_z = da.data();
        double* da_r = da.data() + d;
        double* da_h = da.data() + 2 * d;
        for (std::size_t i = 0; i < d; ++i) {
          const double dz = g[i] * (c[i] - hv[i]);
          da_z[i] = dz * z[i] * (1.0 - z[i]);
          da_h[i] = g[i] * z[i] * (1.0 - c[i] * c[i]);
          dh[i] = g[i] * (1.0 - z[i]);
        }
        matvec_t_acc(un[2]->value.data(), da_h, drh.data(), d, d);
        for (std::size_t i = 0; i < d; ++i) {
          const double dr = drh[i] * hv[i];
          dh[i] += drh[i] * r[i];
          da_r[i] = dr * r[i] * (1.0 - r[i]);
        }
        matvec_t_acc(un[0]->value.data(), da_z, dh.data(), d, d);
        matvec_t_acc(un[1]->value.data(), da_r, dh.data(), d, d);
        if (double* gu = grad_of(*un[0])) outer_acc(gu, da_z, hv, d, d);
        if (double* gu = grad_of(*un[1])) outer_acc(gu, da_r, hv, d, d);
        if (double* gu = grad_of(*un[2])) outer_acc(gu, da_h, rh.data(), d, d);
        if (double* gh = grad_of(*hn)) {
          for (std::size_t i = 0; i < d; ++i) gh[i] += dh[i];
        }
        if (double* gx = grad_of(*xn)) {
          for (std::size_t i = 0; i < 3 * d; ++i) gx[i] += da[i];
        }
      });
}

}  // namespace emgnn::ad
