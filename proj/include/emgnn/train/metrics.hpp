#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "emgnn/error.hpp"

namespace emgnn::train {

struct MetricsReport {
  double mrr = 0.0;
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double r_at_10 = 0.0;
  double mean_rank = 0.0;
  double ndcg = 0.0;
  std::size_t n_examples = 0;
};

/// One ranked example: the 1-based rank of the ground truth and, optionally,
/// the relevance of the option at each ranked position.
struct RankedExample {
  std::size_t rank = 1;
  std::vector<double> ranked_relevance;
};

namespace detail {

inline double ndcg_one(const RankedExample& ex) {
  if (ex.ranked_relevance.empty()) return 1.0 / std::log2(static_cast<double>(ex.rank) + 1.0);
  std::vector<double> ideal = ex.ranked_relevance;
  std::sort(ideal.begin(), ideal.end(), [](double a, double b) { return a > b; });
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    const double disc = std::log2(static_cast<double>(i) + 2.0);
    dcg += ex.ranked_relevance[i] / disc;
    idcg += ideal[i] / disc;
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

}  // namespace detail

/// MRR, R@{1,5,10}, mean rank and NDCG over the full ranked list. Without a
/// relevance list the ground truth is the only relevant item.
inline MetricsReport compute_metrics(std::span<const RankedExample> examples) {
  if (examples.empty()) throw DimensionError("compute_metrics: no examples");
  MetricsReport m;
  for (const auto& ex : examples) {
    if (ex.rank < 1) throw DimensionError("compute_metrics: rank must be >= 1");
    const double r = static_cast<double>(ex.rank);
    m.mrr += 1.0 / r;
    m.r_at_1 += ex.rank <= 1;
    m.r_at_5 += ex.rank <= 5;
    m.r_at_10 += ex.rank <= 10;
    m.mean_rank += r;
    m.ndcg += detail::ndcg_one(ex);
  }
  const double n = static_cast<double>(examples.size());
  m.mrr /= n;
  m.r_at_1 /= n;
  m.r_at_5 /= n;
  m.r_at_10 /= n;
  m.mean_rank /= n;
  m.ndcg /= n;
  m.n_examples = examples.size();
  return m;
}

inline MetricsReport compute_metrics(std::span<const std::size_t> ranks) {
  std::vector<RankedExample> ex;
  ex.reserve(ranks.size());
  for (std::size_t r : ranks) ex.push_back({r, {}});
  return compute_metrics(ex);
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"mrr", m.mrr},         {"r_at_1", m.r_at_1},       {"r_at_5", m.r_at_5}, {"r_at_10", m.r_at_10},
          {"mean_rank", m.mean_rank}, {"ndcg", m.ndcg}, {"n_examples", m.n_examples}};
}

/// Full report: the overall metrics plus one entry per round t (1-based).
inline nlohmann::json report_json(std::span<const RankedExample> examples, std::span<const std::size_t> rounds) {
  nlohmann::json j = to_json(compute_metrics(examples));
  std::map<std::size_t, std::vector<RankedExample>> by_round;
  for (std::size_t k = 0; k < examples.size(); ++k) by_round[rounds[k]].push_back(examples[k]);
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [t, ex] : by_round) per[std::to_string(t)] = to_json(compute_metrics(ex));
  j["per_round"] = per;
  return j;
}

}  // namespace emgnn::train
