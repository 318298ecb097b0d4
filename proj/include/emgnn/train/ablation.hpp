#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgnn/data/dataset.hpp"
#include "emgnn/train/config.hpp"
#include "emgnn/train/metrics.hpp"
#include "emgnn/train/trainer.hpp"

namespace emgnn::train {

struct AblationRow {
  std::string variant;
  MetricsReport metrics;
};

using AblationTable = std::vector<AblationRow>;

inline const std::vector<std::string>& default_ablation_variants() {
  static const std::vector<std::string> v{"full", "const_graph", "no_iter"};
  return v;
}

using VariantCallback = std::function<void(const AblationRow&, const TrainResult&)>;

/// Trains every variant from the same config, seed and data and evaluates it
/// on `held_out`.
inline AblationTable run_ablation(const data::DialogDataset& train_ds, const data::DialogDataset& held_out,
                                  const RunConfig& cfg, const std::vector<std::string>& variants,
                                  const VariantCallback& on_variant = {}) {
  if (variants.empty()) throw ConfigError("ablation: no variants requested");
  for (const auto& v : variants) parse_variant(v);
  AblationTable out;
  for (const auto& v : variants) {
    RunConfig c = cfg;
    c.variant = v;
    TrainResult res = train(train_ds, c);
    AblationRow row{v, evaluate(res.model, held_out).metrics()};
    if (on_variant) on_variant(row, res);
    out.push_back(std::move(row));
  }
  return out;
}

/// Same, evaluating on the trainer's validation split (the last tenth of the
/// dialogs).
inline AblationTable run_ablation(const data::DialogDataset& ds, const RunConfig& cfg,
                                  const std::vector<std::string>& variants, const VariantCallback& on_variant = {}) {
  data::DialogDataset val;
  val.task = ds.task;
  const std::size_t n_train = train_dialog_count(ds.dialogs.size());
  val.dialogs.assign(ds.dialogs.begin() + static_cast<std::ptrdiff_t>(n_train), ds.dialogs.end());
  if (val.dialogs.empty()) throw DataError("ablation: dataset too small for a validation split");
  return run_ablation(ds, val, cfg, variants, on_variant);
}

inline nlohmann::json to_json(const AblationTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t) rows.push_back({{"variant", r.variant}, {"metrics", to_json(r.metrics)}});
  return rows;
}

inline std::string ablation_text(const AblationTable& t) {
  std::size_t w = 7;
  for (const auto& r : t) w = std::max(w, r.variant.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %7s  %7s  %7s  %9s  %7s  %6s\n", static_cast<int>(w), "variant", "mrr",
                "r@1", "r@5", "r@10", "mean_rank", "ndcg", "n");
  out += buf;
  for (const auto& r : t) {
    const auto& m = r.metrics;
    std::snprintf(buf, sizeof buf, "%-*s  %7.4f  %7.4f  %7.4f  %7.4f  %9.4f  %7.4f  %6zu\n", static_cast<int>(w),
                  r.variant.c_str(), m.mrr, m.r_at_1, m.r_at_5, m.r_at_10, m.mean_rank, m.ndcg, m.n_examples);
    out += buf;
  }
  return out;
}

}  // namespace emgnn::train
