#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emgnn/error.hpp"

namespace emgnn::mrf {

/// Energy table over the joint states of an edge (i, j), row-major with
/// rows indexed by the state of i.
struct PairwiseTable {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t si, std::size_t sj) const { return values[si * cols + sj]; }
  /// Energy with the states given in (a, b) node order, whichever end a is.
  double energy(std::size_t a, std::size_t sa, std::size_t sb) const {
    return a == i ? at(sa, sb) : at(sb, sa);
  }
};

/// Small discrete Markov random field with weighted unary and pairwise
/// energies:
///   p(v | W) ∝ exp(−Σ_i w_i φ_u(v_i) − Σ_{(i,j)} w_ij φ_p(v_i, v_j)).
///
/// Edge weights are symmetric, lie in [0, 1] and have a zero diagonal; the
/// setters clamp.
class DiscreteMrf {
 public:
  static constexpr std::size_t kMaxCardinality = 8;

  DiscreteMrf() = default;

  explicit DiscreteMrf(std::vector<std::size_t> cardinalities)
      : cards_(std::move(cardinalities)),
        unary_(cards_.size()),
        node_weights_(cards_.size(), 1.0),
        edge_weights_(cards_.size() * cards_.size(), 0.0),
        adjacency_(cards_.size()) {
    for (std::size_t i = 0; i < cards_.size(); ++i) {
      if (cards_[i] == 0 || cards_[i] > kMaxCardinality) {
        throw DimensionError("mrf: node " + std::to_string(i) +
                             " has cardinality " + std::to_string(cards_[i]) +
                             ", expected 1.." + std::to_string(kMaxCardinality));
      }
      unary_[i].assign(cards_[i], 0.0);
    }
  }

  std::size_t size() const { return cards_.size(); }
  std::size_t cardinality(std::size_t i) const { return cards_.at(i); }
  const std::vector<std::size_t>& cardinalities() const { return cards_; }

  std::span<const double> unary(std::size_t i) const { return unary_.at(i); }
  void set_unary(std::size_t i, std::vector<double> energies) {
    if (energies.size() != cardinality(i)) {
      throw DimensionError("mrf: unary table for node " + std::to_string(i) +
                           " has " + std::to_string(energies.size()) +
                           " entries, expected " + std::to_string(cardinality(i)));
    }
    require_finite(energies, "unary");
    unary_[i] = std::move(energies);
  }

  /// Adds a pairwise energy table between distinct nodes i and j with
  /// weight 1 and returns its edge index.
  std::size_t add_edge(std::size_t i, std::size_t j, std::vector<double> table,
                       double weight = 1.0) {
    if (i >= size() || j >= size() || i == j) {
      throw DimensionError("mrf: invalid edge (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
    }
    if (edge_index(i, j) != npos) {
      throw DimensionError("mrf: duplicate edge (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
    }
    if (table.size() != cardinality(i) * cardinality(j)) {
      throw DimensionError("mrf: pairwise table (" + std::to_string(i) + ", " +
                           std::to_string(j) + ") has " +
                           std::to_string(table.size()) + " entries, expected " +
                           std::to_string(cardinality(i) * cardinality(j)));
    }
    require_finite(table, "pairwise");
    edges_.push_back({i, j, cardinality(j), std::move(table)});
    const std::size_t e = edges_.size() - 1;
    adjacency_[i].push_back({e, j});
    adjacency_[j].push_back({e, i});
    set_edge_weight(i, j, weight);
    return e;
  }

  const std::vector<PairwiseTable>& edges() const { return edges_; }

  struct Neighbor {
    std::size_t edge;
    std::size_t node;
  };
  const std::vector<Neighbor>& neighbors(std::size_t i) const { return adjacency_.at(i); }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t edge_index(std::size_t i, std::size_t j) const {
    for (const auto& nb : adjacency_.at(i)) {
      if (nb.node == j) return nb.edge;
    }
    return npos;
  }

  double edge_weight(std::size_t i, std::size_t j) const {
    return edge_weights_[i * size() + j];
  }
  void set_edge_weight(std::size_t i, std::size_t j, double w) {
    if (i == j) return;
    const double c = clamp01(w);
    edge_weights_[i * size() + j] = c;
    edge_weights_[j * size() + i] = c;
  }
  double weight_of(const PairwiseTable& e) const { return edge_weight(e.i, e.j); }

  double node_weight(std::size_t i) const { return node_weights_.at(i); }
  void set_node_weight(std::size_t i, double w) { node_weights_.at(i) = clamp01(w); }

  /// Product of cardinalities, saturating at `cap + 1`.
  std::size_t state_space(std::size_t cap) const {
    std::size_t total = 1;
    for (std::size_t c : cards_) {
      total *= c;
      if (total > cap) return cap + 1;
    }
    return total;
  }

 private:
  static double clamp01(double w) {
    if (!std::isfinite(w)) throw DimensionError("mrf: non-finite weight");
    return std::clamp(w, 0.0, 1.0);
  }

  static void require_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw DimensionError(std::string("mrf: non-finite ") + what + " energy");
      }
    }
  }

  std::vector<std::size_t> cards_;
  std::vector<std::vector<double>> unary_;
  std::vector<PairwiseTable> edges_;
  std::vector<double> node_weights_;
  std::vector<double> edge_weights_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// Per-node states plus a mask of which nodes are observed (x) versus
/// unobserved (z). States of unobserved nodes are placeholders until filled.
struct Assignment {
  std::vector<std::size_t> states;
  std::vector<bool> observed;

  static Assignment unobserved(std::size_t n) {
    return {std::vector<std::size_t>(n, 0), std::vector<bool>(n, false)};
  }
  static Assignment full(std::vector<std::size_t> states) {
    const std::size_t n = states.size();
    return {std::move(states), std::vector<bool>(n, true)};
  }

  Assignment& observe(std::size_t i, std::size_t state) {
    states.at(i) = state;
    observed.at(i) = true;
    return *this;
  }

  std::size_t size() const { return states.size(); }
  bool all_observed() const {
    return std::all_of(observed.begin(), observed.end(), [](bool b) { return b; });
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

inline void check_assignment(const DiscreteMrf& mrf, const Assignment& a) {
  if (a.states.size() != mrf.size() || a.observed.size() != mrf.size()) {
    throw DimensionError("mrf: assignment covers " + std::to_string(a.states.size()) +
                         " nodes, model has " + std::to_string(mrf.size()));
  }
  for (std::size_t i = 0; i < mrf.size(); ++i) {
    if (a.observed[i] && a.states[i] >= mrf.cardinality(i)) {
      throw DimensionError("mrf: state " + std::to_string(a.states[i]) +
                           " out of range for node " + std::to_string(i));
    }
  }
}

/// Σ_i w_i φ_u(v_i) + Σ_{(i,j)} w_ij φ_p(v_i, v_j) for a full state vector.
inline double energy(const DiscreteMrf& mrf, std::span<const std::size_t> states) {
  double e = 0.0;
  for (std::size_t i = 0; i < mrf.size(); ++i) {
    e += mrf.node_weight(i) * mrf.unary(i)[states[i]];
  }
  for (const auto& edge : mrf.edges()) {
    e += mrf.weight_of(edge) * edge.at(states[edge.i], states[edge.j]);
  }
  return e;
}

inline double energy(const DiscreteMrf& mrf, const Assignment& a) {
  if (a.states.size() != mrf.size()) {
    throw DimensionError("mrf: energy needs a full assignment");
  }
  return energy(mrf, std::span<const std::size_t>(a.states));
}

}  // namespace emgnn::mrf
