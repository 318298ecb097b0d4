#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "emgnn/mrf/model.hpp"
#include "emgnn/rng.hpp"

namespace emgnn::mrf {

inline constexpr std::size_t kMaxEnumeration = 1'000'000;

/// Visits every joint state in lexicographic order (node 0 most
/// significant), holding the states of `fixed` nodes at their values.
template <typename Visit>
void enumerate(const DiscreteMrf& mrf, const Assignment* fixed, Visit&& visit) {
  const std::size_t n = mrf.size();
  std::vector<std::size_t> free_nodes;
  std::vector<std::size_t> states(n, 0);
  std::size_t space = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (fixed && fixed->observed[i]) {
      states[i] = fixed->states[i];
    } else {
      free_nodes.push_back(i);
      space *= mrf.cardinality(i);
      if (space > kMaxEnumeration) {
        throw StateSpaceError("mrf: state space exceeds " +
                              std::to_string(kMaxEnumeration) + " assignments");
      }
    }
  }
  while (true) {
    visit(static_cast<const std::vector<std::size_t>&>(states));
    std::size_t k = free_nodes.size();
    while (k > 0) {
      const std::size_t node = free_nodes[k - 1];
      if (++states[node] < mrf.cardinality(node)) break;
      states[node] = 0;
      --k;
    }
    if (k == 0) return;
  }
}

inline double log_partition(const DiscreteMrf& mrf) {
  std::vector<double> neg;
  enumerate(mrf, nullptr, [&](const auto& s) { neg.push_back(-energy(mrf, s)); });
  const double mx = *std::max_element(neg.begin(), neg.end());
  double z = 0.0;
  for (double v : neg) z += std::exp(v - mx);
  return mx + std::log(z);
}

/// log p(v | W) for a full state vector.
inline double log_likelihood(const DiscreteMrf& mrf, std::span<const std::size_t> states) {
  return -energy(mrf, states) - log_partition(mrf);
}

/// Probability of every joint state in lexicographic order, by enumeration.
inline std::vector<double> joint_prob_bruteforce(const DiscreteMrf& mrf) {
  std::vector<double> p;
  enumerate(mrf, nullptr, [&](const auto& s) { p.push_back(-energy(mrf, s)); });
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

/// Decodes a lexicographic index from joint_prob_bruteforce into states.
inline std::vector<std::size_t> decode_state(const DiscreteMrf& mrf, std::size_t index) {
  std::vector<std::size_t> s(mrf.size());
  for (std::size_t k = mrf.size(); k > 0; --k) {
    s[k - 1] = index % mrf.cardinality(k - 1);
    index /= mrf.cardinality(k - 1);
  }
  return s;
}

/// argmax over completions of p(z | x, W); the lexicographically smallest
/// state vector wins ties.
inline Assignment map_bruteforce(const DiscreteMrf& mrf, const Assignment& observed) {
  check_assignment(mrf, observed);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> arg;
  enumerate(mrf, &observed, [&](const auto& s) {
    const double e = energy(mrf, s);
    if (e < best) {
      best = e;
      arg = s;
    }
  });
  return {std::move(arg), observed.observed};
}

/// Model expectations of every potential: per-edge E[φ_p] and per-node E[φ_u].
struct PotentialExpectations {
  std::vector<double> edge;
  std::vector<double> node;
};

inline PotentialExpectations expected_potentials(const DiscreteMrf& mrf) {
  const auto p = joint_prob_bruteforce(mrf);
  PotentialExpectations ex{std::vector<double>(mrf.edges().size(), 0.0),
                           std::vector<double>(mrf.size(), 0.0)};
  std::size_t k = 0;
  enumerate(mrf, nullptr, [&](const auto& s) {
    const double pk = p[k++];
    for (std::size_t e = 0; e < mrf.edges().size(); ++e) {
      const auto& t = mrf.edges()[e];
      ex.edge[e] += pk * t.at(s[t.i], s[t.j]);
    }
    for (std::size_t i = 0; i < mrf.size(); ++i) ex.node[i] += pk * mrf.unary(i)[s[i]];
  });
  return ex;
}

/// Exact i.i.d. samples drawn by inverting the enumerated joint.
inline std::vector<std::vector<std::size_t>> sample_bruteforce(const DiscreteMrf& mrf,
                                                              std::size_t count, Rng& rng) {
  const auto p = joint_prob_bruteforce(mrf);
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) cdf[k] = (acc += p[k]);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t idx = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    out.push_back(decode_state(mrf, idx));
  }
  return out;
}

}  // namespace emgnn::mrf
