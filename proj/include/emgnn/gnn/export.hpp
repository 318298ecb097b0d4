#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgnn/gnn/model.hpp"

namespace emgnn::gnn {

namespace detail {

inline std::vector<std::vector<double>> square(const Tensor& m) {
  const std::size_t n = m.dim(0);
  std::vector<std::vector<double>> out(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i][j] = m[i * n + j];
  }
  return out;
}

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// {nodes: [labels], raw: [[...]], normalized: [[...]]}; row i of
/// `normalized` holds receiver i's incoming weights.
inline nlohmann::json structure_json(const DialogGraph& g) {
  if (!g.has_weights()) throw DimensionError("structure export: graph has no edge weights");
  nlohmann::json j;
  j["nodes"] = g.labels;
  j["raw"] = detail::square(g.raw);
  j["normalized"] = detail::square(g.normalized);
  return j;
}

/// Directed graph sender -> receiver; edge opacity and pen width scale with
/// the normalized weight.
inline std::string structure_dot(const DialogGraph& g) {
  if (!g.has_weights()) throw DimensionError("structure export: graph has no edge weights");
  const std::size_t n = g.size();
  std::string out = "digraph dialog {\n  rankdir=LR;\n  node [shape=box];\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += "  n" + std::to_string(i) + " [label=\"" + detail::dot_escape(g.labels[i]) + "\"";
    if (!g.observed[i]) out += ", style=dashed";
    out += "];\n";
  }
  char buf[160];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = g.normalized[i * n + j];
      const int alpha = static_cast<int>(std::lround(255.0 * std::clamp(w, 0.0, 1.0)));
      std::snprintf(buf, sizeof buf,
                    "  n%zu -> n%zu [color=\"#006400%02x\", penwidth=%.3f, label=\"%.4f\"];\n", j,
                    i, alpha, 0.5 + 3.0 * w, w);
      out += buf;
    }
  }
  out += "}\n";
  return out;
}

}  // namespace emgnn::gnn
