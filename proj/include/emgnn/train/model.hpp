#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "emgnn/data/dataset.hpp"
#include "emgnn/gnn/model.hpp"
#include "emgnn/io/checkpoint.hpp"
#include "emgnn/io/files.hpp"
#include "emgnn/text/encoder.hpp"
#include "emgnn/text/tokenize.hpp"
#include "emgnn/train/config.hpp"

namespace emgnn::train {

using ad::Tape;
using ad::Tensor;

inline constexpr std::size_t kCaptionLen = 40;
inline constexpr std::size_t kQuestionLen = 20;
inline constexpr std::size_t kAnswerLen = 20;

/// Everything a checkpoint holds: vocabulary, encoder and GNN weights, and
/// the inference settings the weights were trained with.
struct Model {
  text::Vocabulary vocab;
  text::EncoderParams enc;
  gnn::GnnParams gnn;
  gnn::InferOptions infer;
  data::Task mode = data::Task::visdial;

  std::size_t context_dim() const { return enc.context_dim(); }

  std::vector<Tensor*> parameters() {
    auto out = enc.tensors();
    for (Tensor* t : gnn.tensors()) out.push_back(t);
    return out;
  }
  std::vector<const Tensor*> parameters() const {
    auto out = enc.tensors();
    for (const Tensor* t : gnn.tensors()) out.push_back(t);
    return out;
  }
  static std::vector<std::string> parameter_names() {
    std::vector<std::string> out;
    for (const auto& n : text::EncoderParams::tensor_names()) out.push_back("enc." + n);
    for (const auto& n : gnn::GnnParams::tensor_names()) out.push_back("gnn." + n);
    return out;
  }

  void zero_grad() {
    for (Tensor* t : parameters()) t->zero_grad();
  }

  static Model init(text::Vocabulary vocab, const RunConfig& cfg, std::size_t ctx_dim) {
    check_config(cfg);
    Rng rng(cfg.seed);
    Model m;
    m.vocab = std::move(vocab);
    m.enc = text::EncoderParams::uniform(m.vocab.size(), cfg.dim, cfg.dim, ctx_dim, rng);
    m.gnn = gnn::GnnParams::uniform(cfg.dim, cfg.fc_dim, rng);
    m.infer = infer_options(cfg);
    m.mode = data::parse_task(cfg.mode);
    return m;
  }
};

namespace detail {

// meta.hparams layout: outer_iters, inner_steps, constant_graph, mode.
inline io::NamedTensor hparams_tensor(const Model& m) {
  return {"meta.hparams",
          {4},
          {static_cast<double>(m.infer.outer_iters), static_cast<double>(m.infer.inner_steps),
           m.infer.constant_graph ? 1.0 : 0.0, m.mode == data::Task::visdial ? 0.0 : 1.0}};
}

}  // namespace detail

inline io::CheckpointData to_checkpoint(const Model& m) {
  io::CheckpointData c;
  c.vocab = m.vocab.tokens();
  const auto names = Model::parameter_names();
  const auto params = m.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    io::NamedTensor t;
    t.name = names[k];
    for (auto d : params[k]->shape()) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.values.assign(params[k]->values().begin(), params[k]->values().end());
    c.tensors.push_back(std::move(t));
  }
  c.tensors.push_back(detail::hparams_tensor(m));
  return c;
}

/// Rebuilds a model; every expected tensor must be present exactly once and
/// no other name is accepted.
inline Model from_checkpoint(const io::CheckpointData& c) {
  Model m;
  try {
    m.vocab = text::Vocabulary::from_tokens(c.vocab);
  } catch (const DataError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  std::map<std::string, const io::NamedTensor*> by_name;
  for (const auto& t : c.tensors) {
    if (!by_name.emplace(t.name, &t).second) throw CheckpointError("checkpoint: duplicate tensor '" + t.name + "'");
  }
  auto names = Model::parameter_names();
  names.push_back("meta.hparams");
  const std::set<std::string> expected(names.begin(), names.end());
  for (const auto& [name, t] : by_name) {
    if (!expected.count(name)) throw CheckpointError("checkpoint: unknown tensor '" + name + "'");
  }
  for (const auto& n : names) {
    if (!by_name.count(n)) throw CheckpointError("checkpoint: missing tensor '" + n + "'");
  }
  auto dims = [&](const std::string& n, std::size_t i) -> std::size_t {
    const auto& d = by_name.at(n)->dims;
    if (i >= d.size()) throw CheckpointError("checkpoint: tensor '" + n + "' has rank " + std::to_string(d.size()));
    return d[i];
  };
  const std::size_t e = dims("enc.embed", 1), d = dims("enc.gru2.b_z", 0), k = dims("gnn.fc2_b", 0);
  const std::size_t ctx = dims("enc.fuse_w", 1) - d;
  m.enc = text::EncoderParams::zeros(m.vocab.size(), e, d, ctx);
  m.gnn = gnn::GnnParams::zeros(d, k);
  const auto params = m.parameters();
  for (std::size_t i = 0; i + 1 < names.size(); ++i) {
    const auto& t = *by_name.at(names[i]);
    ad::Shape shape(t.dims.begin(), t.dims.end());
    if (shape != params[i]->shape()) {
      throw CheckpointError("checkpoint: tensor '" + names[i] + "' has shape " + ad::shape_str(shape) + ", expected " +
                            ad::shape_str(params[i]->shape()));
    }
    std::copy(t.values.begin(), t.values.end(), params[i]->mutable_values().begin());
  }
  const auto& hp = *by_name.at("meta.hparams");
  if (hp.values.size() != 4) throw CheckpointError("checkpoint: meta.hparams has wrong length");
  m.infer.outer_iters = static_cast<std::size_t>(hp.values[0]);
  m.infer.inner_steps = static_cast<std::size_t>(hp.values[1]);
  m.infer.constant_graph = hp.values[2] != 0.0;
  m.mode = hp.values[3] == 0.0 ? data::Task::visdial : data::Task::visdialq;
  return m;
}

inline void save_model(const std::string& path, const Model& m) {
  io::write_file_atomic(path, io::encode_checkpoint(to_checkpoint(m)));
}

inline Model load_model(const std::string& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const DataError& e) {
    throw CheckpointError(e.what());
  }
  return from_checkpoint(io::decode_checkpoint(bytes));
}

/// One round with every string already mapped to token ids.
struct PreparedExample {
  std::size_t dialog = 0;
  std::size_t round = 0;
  text::GraphText text;
  std::vector<std::vector<std::size_t>> options;
  std::size_t gt_index = 0;
  std::vector<double> relevance;
  Tensor context;

  /// 1-based round number t of the graph (index of the query node).
  std::size_t t() const { return text.history.size() + 1; }
};

inline std::vector<std::vector<std::string>> corpus_tokens(const data::DialogDataset& ds) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& d : ds.dialogs) {
    corpus.push_back(text::tokenize(d.caption, kCaptionLen));
    for (const auto& r : d.rounds) {
      corpus.push_back(text::tokenize(r.question, kQuestionLen));
      corpus.push_back(text::tokenize(r.answer, kAnswerLen));
      for (const auto& o : r.options) corpus.push_back(text::tokenize(o, kAnswerLen));
    }
  }
  return corpus;
}

inline PreparedExample prepare_example(const data::ExampleView& v, const text::Vocabulary& vocab, data::Task task) {
  auto ids = [&](const std::string& s, std::size_t len) { return vocab.encode(text::tokenize(s, len)); };
  PreparedExample ex;
  ex.dialog = v.dialog;
  ex.round = v.round;
  ex.text.caption = ids(v.caption, kCaptionLen);
  ex.text.labels.push_back("caption: " + v.caption);
  for (std::size_t k = 0; k < v.history.size(); ++k) {
    const auto& [q, a] = v.history[k];
    ex.text.history.push_back(text::qa_ids(ids(q, kQuestionLen), ids(a, kAnswerLen)));
    ex.text.labels.push_back("Q" + std::to_string(k + 1) + ": " + q + " A: " + a);
  }
  ex.text.query = task == data::Task::visdial ? ids(v.query, kQuestionLen) : ids(v.query, kCaptionLen);
  ex.text.labels.push_back("query: " + v.query);
  const std::size_t olen = task == data::Task::visdial ? kAnswerLen : kQuestionLen;
  for (const auto& o : v.options) ex.options.push_back(ids(o, olen));
  ex.gt_index = v.gt_index;
  if (v.relevance) ex.relevance = *v.relevance;
  if (v.context && !v.context->empty()) ex.context = Tensor::vector(*v.context);
  return ex;
}

inline std::vector<PreparedExample> prepare(const data::DialogDataset& ds, const text::Vocabulary& vocab) {
  std::vector<PreparedExample> out;
  out.reserve(ds.num_examples());
  for (std::size_t d = 0; d < ds.dialogs.size(); ++d) {
    for (std::size_t r = 0; r < ds.dialogs[d].rounds.size(); ++r) {
      out.push_back(prepare_example(data::model_view(ds, d, r), vocab, ds.task));
    }
  }
  return out;
}

/// encode → em_infer → option scores. The final graph is left in `graph`
/// when given.
inline Tensor forward(Tape& tape, const Model& m, const PreparedExample& ex, text::EncodeCache& cache,
                      gnn::DialogGraph* graph = nullptr) {
  if (ex.context.defined() && ex.context.size() != m.context_dim()) {
    throw DataError("context_feature has length " + std::to_string(ex.context.size()) + ", model expects " +
                    std::to_string(m.context_dim()));
  }
  auto g = text::init_node_states(tape, ex.text, ex.context, m.enc, &cache);
  gnn::em_infer(tape, g, m.gnn, m.infer);
  std::vector<Tensor> opts;
  opts.reserve(ex.options.size());
  for (const auto& o : ex.options) opts.push_back(cache.get(tape, o, m.enc));
  Tensor scores = gnn::score_options(tape, g.states[g.query()], opts).scores;
  if (graph) *graph = std::move(g);
  return scores;
}

}  // namespace emgnn::train
