#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgnn/error.hpp"
#include "emgnn/mrf/model.hpp"

namespace emgnn::mrf {

// Doubles are written in shortest round-trip form, so parse(dump(m)) restores
// every value bit for bit.
inline nlohmann::json to_json(const DiscreteMrf& mrf) {
  nlohmann::json j;
  j["cardinalities"] = mrf.cardinalities();
  auto& unary = j["unary"] = nlohmann::json::array();
  for (std::size_t i = 0; i < mrf.size(); ++i) {
    unary.push_back(std::vector<double>(mrf.unary(i).begin(), mrf.unary(i).end()));
  }
  auto& pairwise = j["pairwise"] = nlohmann::json::array();
  for (const auto& e : mrf.edges()) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t a = 0; a < mrf.cardinality(e.i); ++a) {
      rows.push_back(std::vector<double>(e.values.begin() + a * e.cols,
                                         e.values.begin() + (a + 1) * e.cols));
    }
    pairwise.push_back({{"i", e.i}, {"j", e.j}, {"table", rows}});
  }
  std::vector<double> nodes(mrf.size());
  std::vector<std::vector<double>> matrix(mrf.size(), std::vector<double>(mrf.size()));
  for (std::size_t a = 0; a < mrf.size(); ++a) {
    nodes[a] = mrf.node_weight(a);
    for (std::size_t b = 0; b < mrf.size(); ++b) matrix[a][b] = mrf.edge_weight(a, b);
  }
  j["weights"] = {{"nodes", nodes}, {"edges", matrix}};
  return j;
}

inline DiscreteMrf from_json(const nlohmann::json& j) {
  try {
    DiscreteMrf mrf(j.at("cardinalities").get<std::vector<std::size_t>>());
    const auto& unary = j.at("unary");
    if (unary.size() != mrf.size()) throw DataError("mrf json: unary has wrong node count");
    for (std::size_t i = 0; i < mrf.size(); ++i) {
      mrf.set_unary(i, unary[i].get<std::vector<double>>());
    }
    for (const auto& e : j.at("pairwise")) {
      std::vector<double> flat;
      for (const auto& row : e.at("table")) {
        const auto r = row.get<std::vector<double>>();
        flat.insert(flat.end(), r.begin(), r.end());
      }
      mrf.add_edge(e.at("i").get<std::size_t>(), e.at("j").get<std::size_t>(), std::move(flat));
    }
    const auto& w = j.at("weights");
    const auto nodes = w.at("nodes").get<std::vector<double>>();
    const auto edges = w.at("edges").get<std::vector<std::vector<double>>>();
    if (nodes.size() != mrf.size() || edges.size() != mrf.size()) {
      throw DataError("mrf json: weights have wrong node count");
    }
    for (std::size_t a = 0; a < mrf.size(); ++a) {
      mrf.set_node_weight(a, nodes[a]);
      if (edges[a].size() != mrf.size()) throw DataError("mrf json: edge weight row size");
      for (std::size_t b = 0; b < mrf.size(); ++b) {
        if (edges[a][b] != edges[b][a]) throw DataError("mrf json: edge weights not symmetric");
        if (a != b) mrf.set_edge_weight(a, b, edges[a][b]);
      }
    }
    return mrf;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("mrf json: ") + e.what());
  } catch (const DimensionError& e) {
    throw DataError(std::string("mrf json: ") + e.what());
  }
}

}  // namespace emgnn::mrf
