#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "emgnn/data/dataset.hpp"
#include "emgnn/error.hpp"
#include "emgnn/rng.hpp"
#include "emgnn/train/model.hpp"

namespace emgnn::train {

/// Probability that a positive outranks a negative, ties counting half.
/// Empty when either class is missing.
inline std::optional<double> auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      ++pairs;
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

/// Incoming weights of the query node from every earlier node, with the
/// planted labels for those nodes.
struct StructureSample {
  std::size_t dialog = 0;
  std::vector<double> weights;
  std::vector<bool> labels;
};

struct StructureReport {
  double auc = 0.0;
  std::size_t n_dialogs = 0;
  std::size_t n_rounds = 0;
  double null_mean = 0.0;
  double null_p95 = 0.0;
  std::size_t null_draws = 0;
};

inline nlohmann::json to_json(const StructureReport& r) {
  return {{"auc", r.auc},         {"n_dialogs", r.n_dialogs}, {"n_rounds", r.n_rounds},
          {"null_mean", r.null_mean}, {"null_p95", r.null_p95}, {"null_draws", r.null_draws}};
}

/// Runs the model on every round that carries planted_deps and collects the
/// query node's incoming normalized weights.
inline std::vector<StructureSample> structure_samples(const Model& m, const data::DialogDataset& ds) {
  if (ds.task != m.mode) throw DataError("structure: dataset task does not match model mode");
  std::vector<StructureSample> out;
  for (std::size_t d = 0; d < ds.dialogs.size(); ++d) {
    Tape tape(false);
    text::EncodeCache cache;
    for (std::size_t r = 0; r < ds.dialogs[d].rounds.size(); ++r) {
      const auto& deps = ds.dialogs[d].rounds[r].planted_deps;
      if (!deps) continue;
      const auto ex = prepare_example(data::model_view(ds, d, r), m.vocab, ds.task);
      gnn::DialogGraph g;
      forward(tape, m, ex, cache, &g);
      const std::size_t t = g.query(), n = g.size();
      StructureSample s;
      s.dialog = d;
      s.labels.assign(t, false);
      for (std::size_t k : *deps) {
        if (k < t) s.labels[k] = true;
      }
      for (std::size_t j = 0; j < t; ++j) s.weights.push_back(g.has_weights() ? g.normalized.values()[t * n + j] : 0.0);
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace detail {

/// Mean over dialogs of the mean per-round AUC; rounds with a single class
/// are skipped.
inline double dialog_mean_auc(const std::vector<StructureSample>& samples, std::size_t* n_dialogs = nullptr,
                              std::size_t* n_rounds = nullptr) {
  std::map<std::size_t, std::pair<double, std::size_t>> per;
  std::size_t rounds = 0;
  for (const auto& s : samples) {
    if (const auto a = auc(s.weights, s.labels)) {
      auto& [sum, cnt] = per[s.dialog];
      sum += *a;
      ++cnt;
      ++rounds;
    }
  }
  if (per.empty()) throw DataError("structure: no round has both dependent and independent nodes");
  double total = 0.0;
  for (const auto& [d, sc] : per) total += sc.first / static_cast<double>(sc.second);
  if (n_dialogs) *n_dialogs = per.size();
  if (n_rounds) *n_rounds = rounds;
  return total / static_cast<double>(per.size());
}

}  // namespace detail

/// Structure-recovery AUC plus a null distribution obtained by shuffling the
/// labels of each round among its candidate nodes.
inline StructureReport structure_auc(const std::vector<StructureSample>& samples, std::size_t null_draws = 1000,
                                     std::uint64_t seed = 1) {
  StructureReport rep;
  rep.auc = detail::dialog_mean_auc(samples, &rep.n_dialogs, &rep.n_rounds);
  rep.null_draws = null_draws;
  if (null_draws == 0) return rep;
  Rng rng(seed);
  std::vector<double> null;
  null.reserve(null_draws);
  auto shuffled = samples;
  for (std::size_t k = 0; k < null_draws; ++k) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::vector<bool> l = samples[i].labels;
      rng.shuffle(l);
      shuffled[i].labels = std::move(l);
    }
    null.push_back(detail::dialog_mean_auc(shuffled));
  }
  std::sort(null.begin(), null.end());
  double mean = 0.0;
  for (double v : null) mean += v;
  rep.null_mean = mean / static_cast<double>(null.size());
  rep.null_p95 = null[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(null.size()))) - 1];
  return rep;
}

}  // namespace emgnn::train
