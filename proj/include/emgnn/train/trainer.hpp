#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "emgnn/data/dataset.hpp"
#include "emgnn/gnn/model.hpp"
#include "emgnn/rng.hpp"
#include "emgnn/text/vocab.hpp"
#include "emgnn/train/adam.hpp"
#include "emgnn/train/config.hpp"
#include "emgnn/train/metrics.hpp"
#include "emgnn/train/model.hpp"

namespace emgnn::train {

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;
  std::size_t rejected_steps = 0;
  std::optional<MetricsReport> val;
};

inline nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json j{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"lr", e.lr}, {"rejected_steps", e.rejected_steps}};
  j["val"] = e.val ? to_json(*e.val) : nlohmann::json(nullptr);
  return j;
}

struct EvalResult {
  std::vector<RankedExample> ranked;
  /// Graph round t of each example.
  std::vector<std::size_t> rounds;

  MetricsReport metrics() const { return compute_metrics(ranked); }
  nlohmann::json report() const { return report_json(ranked, rounds); }
};

inline RankedExample rank_example(std::span<const double> scores, const PreparedExample& ex) {
  RankedExample r;
  r.rank = gnn::rank_of(scores, ex.gt_index);
  if (!ex.relevance.empty()) {
    for (std::size_t o : gnn::ranking(scores)) r.ranked_relevance.push_back(ex.relevance[o]);
  }
  return r;
}

/// Scores every example without recording gradients.
inline EvalResult evaluate(const Model& m, const std::vector<PreparedExample>& examples) {
  EvalResult out;
  std::size_t last_dialog = static_cast<std::size_t>(-1);
  std::optional<Tape> tape;
  std::optional<text::EncodeCache> cache;
  for (const auto& ex : examples) {
    if (ex.dialog != last_dialog) {
      tape.emplace(false);
      cache.emplace();
      last_dialog = ex.dialog;
    }
    const Tensor s = forward(*tape, m, ex, *cache);
    out.ranked.push_back(rank_example(s.values(), ex));
    out.rounds.push_back(ex.t());
  }
  return out;
}

inline EvalResult evaluate(const Model& m, const data::DialogDataset& ds) {
  if (ds.task != m.mode) {
    throw DataError("dataset task '" + data::task_name(ds.task) + "' does not match model mode '" +
                    data::task_name(m.mode) + "'");
  }
  return evaluate(m, prepare(ds, m.vocab));
}

/// Dialog indices [0, n − floor(n/10)) train, the rest validate.
inline std::size_t train_dialog_count(std::size_t n_dialogs) { return n_dialogs - n_dialogs / 10; }

inline std::size_t context_dim_of(const data::DialogDataset& ds) {
  std::optional<std::size_t> dim;
  for (std::size_t d = 0; d < ds.dialogs.size(); ++d) {
    const auto& c = ds.dialogs[d].context_feature;
    const std::size_t n = c ? c->size() : 0;
    if (dim && *dim != n) {
      throw DataError("dialog " + std::to_string(d) + " field 'context_feature': length " + std::to_string(n) +
                      " differs from earlier dialogs (" + std::to_string(*dim) + ")");
    }
    dim = n;
  }
  return dim.value_or(0);
}

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch cross-entropy training. Batches are runs of consecutive rounds
/// taken in a per-epoch shuffled dialog order, so a batch shares encodings of
/// dialogs it covers.
inline TrainResult train(const data::DialogDataset& ds, const RunConfig& cfg, const EpochCallback& on_epoch = {}) {
  check_config(cfg);
  if (ds.dialogs.empty() || ds.num_examples() == 0) throw DataError("train: dataset has no examples");
  if (data::parse_task(cfg.mode) != ds.task) {
    throw ConfigError("config key 'mode': '" + cfg.mode + "' but dataset task is '" + data::task_name(ds.task) + "'");
  }
  text::Vocabulary vocab = text::build_vocab(corpus_tokens(ds));
  TrainResult res{Model::init(std::move(vocab), cfg, context_dim_of(ds)), {}};
  Model& m = res.model;

  const auto all = prepare(ds, m.vocab);
  const std::size_t n_train = std::max<std::size_t>(1, train_dialog_count(ds.dialogs.size()));
  std::vector<std::vector<std::size_t>> by_dialog(ds.dialogs.size());
  for (std::size_t k = 0; k < all.size(); ++k) by_dialog[all[k].dialog].push_back(k);
  std::vector<PreparedExample> val;
  std::size_t n_train_examples = 0;
  for (std::size_t d = 0; d < ds.dialogs.size(); ++d) {
    if (d >= n_train) {
      for (std::size_t k : by_dialog[d]) val.push_back(all[k]);
    } else {
      n_train_examples += by_dialog[d].size();
    }
  }
  const std::size_t n_batches = (n_train_examples + cfg.batch_size - 1) / cfg.batch_size;

  auto params = m.parameters();
  AdamOptions ao;
  ao.lr_base = cfg.lr_base;
  ao.lr_floor = cfg.lr_floor;
  ao.decay_steps = cfg.epochs * n_batches;
  OptimizerState opt = make_optimizer(params, ao);

  Rng order_rng(cfg.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> dialogs(n_train);
  for (std::size_t d = 0; d < n_train; ++d) dialogs[d] = d;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(dialogs);
    std::vector<std::size_t> order;
    for (std::size_t d : dialogs) order.insert(order.end(), by_dialog[d].begin(), by_dialog[d].end());

    EpochLog log;
    log.epoch = epoch;
    log.lr = opt.learning_rate();
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      Tape tape;
      text::EncodeCache cache;
      std::vector<Tensor> losses;
      for (std::size_t k = b; k < e; ++k) {
        const auto& ex = all[order[k]];
        losses.push_back(ad::cross_entropy(tape, forward(tape, m, ex, cache), ex.gt_index));
      }
      std::vector<double> ones(losses.size(), 1.0 / static_cast<double>(losses.size()));
      const Tensor loss = ad::weighted_sum(tape, Tensor::vector(ones), losses);
      m.zero_grad();
      tape.backward(loss);
      const double lv = loss.item();
      if (std::isfinite(lv) && adam_step(params, opt)) {
        loss_sum += lv * static_cast<double>(e - b);
        counted += e - b;
      } else {
        ++log.rejected_steps;
      }
    }
    m.zero_grad();
    log.train_loss = counted ? loss_sum / static_cast<double>(counted) : std::nan("");
    if (!val.empty()) log.val = evaluate(m, val).metrics();
    if (on_epoch) on_epoch(log);
    res.log.push_back(log);
  }
  return res;
}

}  // namespace emgnn::train
