#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "emgnn/autodiff/gru.hpp"
#include "emgnn/gnn/model.hpp"
#include "emgnn/text/vocab.hpp"

namespace emgnn::text {

using ad::Tape;
using ad::Tensor;

/// Word embeddings, a two-layer recurrent encoder and the fusion layer used
/// when a context vector is present.
struct EncoderParams {
  Tensor embed;
  ad::GruParams gru1, gru2;
  Tensor fuse_w, fuse_b;

  std::size_t vocab_size() const { return embed.dim(0); }
  std::size_t embed_dim() const { return embed.dim(1); }
  std::size_t state_dim() const { return gru2.state_dim(); }
  std::size_t context_dim() const { return fuse_w.dim(1) - state_dim(); }

  static EncoderParams zeros(std::size_t vocab, std::size_t e, std::size_t d, std::size_t ctx_dim = 0) {
    EncoderParams p;
    p.embed = Tensor::zeros({vocab, e}, true);
    p.gru1 = ad::GruParams::zeros(e, d);
    p.gru2 = ad::GruParams::zeros(d, d);
    p.fuse_w = Tensor::zeros({d, d + ctx_dim}, true);
    p.fuse_b = Tensor::zeros({d}, true);
    return p;
  }

  static EncoderParams uniform(std::size_t vocab, std::size_t e, std::size_t d, std::size_t ctx_dim,
                               Rng& rng) {
    EncoderParams p = zeros(vocab, e, d, ctx_dim);
    const double a = 1.0 / std::sqrt(static_cast<double>(d));
    auto emb = p.embed.mutable_values();
    for (std::size_t k = e; k < emb.size(); ++k) emb[k] = rng.uniform(-1.0, 1.0);
    p.gru1 = ad::GruParams::uniform(e, d, rng);
    p.gru2 = ad::GruParams::uniform(d, d, rng);
    for (Tensor* t : {&p.fuse_w, &p.fuse_b}) {
      for (double& v : t->mutable_values()) v = rng.uniform(-a, a);
    }
    return p;
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out{&embed};
    for (Tensor* t : gru1.tensors()) out.push_back(t);
    for (Tensor* t : gru2.tensors()) out.push_back(t);
    out.push_back(&fuse_w);
    out.push_back(&fuse_b);
    return out;
  }
  std::vector<const Tensor*> tensors() const {
    std::vector<const Tensor*> out{&embed};
    for (const Tensor* t : gru1.tensors()) out.push_back(t);
    for (const Tensor* t : gru2.tensors()) out.push_back(t);
    out.push_back(&fuse_w);
    out.push_back(&fuse_b);
    return out;
  }
  static std::vector<std::string> tensor_names() {
    std::vector<std::string> out{"embed"};
    for (const auto& n : ad::GruParams::tensor_names()) out.push_back("gru1." + n);
    for (const auto& n : ad::GruParams::tensor_names()) out.push_back("gru2." + n);
    out.push_back("fuse_w");
    out.push_back("fuse_b");
    return out;
  }
};

/// Hidden states of both GRU layers; undefined before the first non-PAD token.
struct EncoderState {
  Tensor h1, h2;
};

inline void check_token(std::size_t id, const EncoderParams& p) {
  if (id >= p.vocab_size()) {
    throw DimensionError("encode_sequence: token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(p.vocab_size()));
  }
}

/// First-layer input projection of one token.
inline Tensor token_input(Tape& tape, std::size_t id, const EncoderParams& p) {
  check_token(id, p);
  return ad::gru_input(tape, ad::embedding(tape, p.embed, id), p.gru1);
}

/// Advances both layers by one token; PAD leaves the state unchanged. `x1`
/// is the token's token_input when the caller already has it.
inline EncoderState encode_step(Tape& tape, EncoderState s, std::size_t id, const EncoderParams& p,
                                Tensor x1 = {}) {
  check_token(id, p);
  if (id == kPad) return s;
  if (!s.h1.defined()) {
    s.h1 = Tensor::zeros({p.state_dim()});
    s.h2 = Tensor::zeros({p.state_dim()});
  }
  if (!x1.defined()) x1 = token_input(tape, id, p);
  s.h1 = ad::gru_step(tape, s.h1, x1, p.gru1);
  s.h2 = ad::gru_cell(tape, s.h2, s.h1, p.gru2);
  return s;
}

inline Tensor final_state(const EncoderState& s, const EncoderParams& p) {
  return s.h2.defined() ? s.h2 : Tensor::zeros({p.state_dim()});
}

/// Final top-layer state of the two stacked GRUs over the sequence. PAD
/// tokens are skipped, so an all-PAD or empty sequence encodes to zeros.
inline Tensor encode_sequence(Tape& tape, const std::vector<std::size_t>& ids, const EncoderParams& p) {
  EncoderState s;
  for (std::size_t id : ids) s = encode_step(tape, s, id, p);
  return final_state(s, p);
}

/// relu(W [a; ctx] + b), or `a` itself without a context vector.
inline Tensor fuse(Tape& tape, const Tensor& a, const Tensor& ctx, const EncoderParams& p) {
  if (!ctx.defined() || ctx.size() == 0) return a;
  if (ctx.size() != p.context_dim()) {
    throw DimensionError("fuse: context " + ad::shape_str(ctx.shape()) + " but encoder expects " +
                         std::to_string(p.context_dim()));
  }
  return ad::relu(tape, ad::linear(tape, ad::concat(tape, {a, ctx}), p.fuse_w, p.fuse_b));
}

/// Memoized encodings for one tape. States are kept for every prefix, so
/// sequences sharing a prefix only pay for their distinct suffix, and each
/// token's first-layer projection is computed once.
class EncodeCache {
 public:
  Tensor get(Tape& tape, const std::vector<std::size_t>& ids, const EncoderParams& p) {
    std::size_t n = ids.size();
    std::vector<std::size_t> key(ids);
    EncoderState s;
    for (; n > 0; --n, key.pop_back()) {
      const auto it = prefix_.find(key);
      if (it != prefix_.end()) {
        s = it->second;
        break;
      }
    }
    for (std::size_t k = n; k < ids.size(); ++k) {
      s = encode_step(tape, s, ids[k], p, input(tape, ids[k], p));
      key.push_back(ids[k]);
      prefix_.emplace(key, s);
    }
    return final_state(s, p);
  }
  std::size_t size() const { return prefix_.size(); }

 private:
  Tensor input(Tape& tape, std::size_t id, const EncoderParams& p) {
    if (id == kPad) return {};
    auto it = input_.find(id);
    if (it == input_.end()) it = input_.emplace(id, token_input(tape, id, p)).first;
    return it->second;
  }

  std::map<std::vector<std::size_t>, EncoderState> prefix_;
  std::map<std::size_t, Tensor> input_;
};

/// Token ids of every node in one round's graph.
struct GraphText {
  std::vector<std::size_t> caption;
  /// Question, kSep, answer per history round.
  std::vector<std::vector<std::size_t>> history;
  /// Text that seeds the unobserved node.
  std::vector<std::size_t> query;
  std::vector<std::string> labels;
};

/// Node 0 ← caption, 1..t−1 ← history, t ← query, each passed through fuse.
inline gnn::DialogGraph init_node_states(Tape& tape, const GraphText& text, const Tensor& ctx,
                                         const EncoderParams& p, EncodeCache* cache = nullptr) {
  auto enc = [&](const std::vector<std::size_t>& ids) {
    return fuse(tape, cache ? cache->get(tape, ids, p) : encode_sequence(tape, ids, p), ctx, p);
  };
  std::vector<Tensor> states;
  states.push_back(enc(text.caption));
  for (const auto& h : text.history) states.push_back(enc(h));
  states.push_back(enc(text.query));
  return gnn::DialogGraph::make(std::move(states), text.labels);
}

inline std::vector<std::size_t> qa_ids(const std::vector<std::size_t>& q, const std::vector<std::size_t>& a) {
  std::vector<std::size_t> out(q);
  out.push_back(kSep);
  out.insert(out.end(), a.begin(), a.end());
  return out;
}

}  // namespace emgnn::text
