#pragma once

#include <cstddef>
#include <vector>

#include "emgnn/mrf/model.hpp"
#include "emgnn/rng.hpp"

namespace emgnn::mrf {

struct RandomMrfSpec {
  std::size_t nodes = 5;
  std::size_t max_cardinality = 4;
  /// Probability of each non-tree pair becoming an extra edge.
  double extra_edge_prob = 0.0;
  double energy_scale = 1.0;
  /// Draw weights uniformly in [0, 1] instead of fixing them at 1.
  bool random_weights = true;
};

/// Random tree (node k attaches to a uniformly chosen earlier node) plus
/// optional extra edges, with Gaussian energies.
inline DiscreteMrf random_mrf(const RandomMrfSpec& spec, Rng& rng) {
  std::vector<std::size_t> cards(spec.nodes);
  for (auto& c : cards) c = 2 + rng.uniform_int(spec.max_cardinality - 1);
  DiscreteMrf mrf(cards);
  for (std::size_t i = 0; i < spec.nodes; ++i) {
    std::vector<double> u(cards[i]);
    for (auto& v : u) v = spec.energy_scale * rng.normal();
    mrf.set_unary(i, std::move(u));
    if (spec.random_weights) mrf.set_node_weight(i, rng.uniform());
  }
  auto add = [&](std::size_t a, std::size_t b) {
    std::vector<double> t(cards[a] * cards[b]);
    for (auto& v : t) v = spec.energy_scale * rng.normal();
    mrf.add_edge(a, b, std::move(t), spec.random_weights ? rng.uniform() : 1.0);
  };
  for (std::size_t k = 1; k < spec.nodes; ++k) add(rng.uniform_int(k), k);
  if (spec.extra_edge_prob > 0.0) {
    for (std::size_t a = 0; a < spec.nodes; ++a) {
      for (std::size_t b = a + 1; b < spec.nodes; ++b) {
        if (mrf.edge_index(a, b) == DiscreteMrf::npos && rng.bernoulli(spec.extra_edge_prob)) {
          add(a, b);
        }
      }
    }
  }
  return mrf;
}

/// Each node observed with probability `p`, at a uniform state.
inline Assignment random_observation(const DiscreteMrf& mrf, double p, Rng& rng) {
  Assignment a = Assignment::unobserved(mrf.size());
  for (std::size_t i = 0; i < mrf.size(); ++i) {
    if (rng.bernoulli(p)) a.observe(i, rng.uniform_int(mrf.cardinality(i)));
  }
  return a;
}

}  // namespace emgnn::mrf
