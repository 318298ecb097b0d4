#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "emgnn/data/dataset.hpp"
#include "emgnn/error.hpp"
#include "emgnn/gnn/model.hpp"

namespace emgnn::train {

enum class VariantKind { full, const_graph, no_iter, n_iter };

struct Variant {
  VariantKind kind = VariantKind::full;
  /// Outer iterations for n_iter.
  std::size_t n = 0;

  bool operator==(const Variant&) const = default;
};

inline std::string variant_name(const Variant& v) {
  switch (v.kind) {
    case VariantKind::full: return "full";
    case VariantKind::const_graph: return "const_graph";
    case VariantKind::no_iter: return "no_iter";
    case VariantKind::n_iter: return "n_iter:" + std::to_string(v.n);
  }
  return "full";
}

/// "full", "const_graph", "no_iter" or "n_iter:N".
inline Variant parse_variant(const std::string& s) {
  if (s == "full") return {VariantKind::full, 0};
  if (s == "const_graph") return {VariantKind::const_graph, 0};
  if (s == "no_iter") return {VariantKind::no_iter, 0};
  if (s.rfind("n_iter:", 0) == 0 && s.size() > 7 && s.find_first_not_of("0123456789", 7) == std::string::npos) {
    return {VariantKind::n_iter, static_cast<std::size_t>(std::stoull(s.substr(7)))};
  }
  throw ConfigError("unknown variant '" + s + "' (expected full, const_graph, no_iter or n_iter:N)");
}

struct RunConfig {
  std::size_t dim = 32;
  std::size_t fc_dim = 32;
  std::size_t outer_iters = 3;
  std::size_t inner_steps = 2;
  std::string variant = "full";
  std::size_t batch_size = 32;
  double lr_base = 1e-3;
  double lr_floor = 5e-5;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t k_options = 20;
  std::string mode = "visdial";

  bool operator==(const RunConfig&) const = default;
};

inline gnn::InferOptions infer_options(const RunConfig& c) {
  const Variant v = parse_variant(c.variant);
  gnn::InferOptions o{c.outer_iters, c.inner_steps, false};
  if (v.kind == VariantKind::const_graph) o.constant_graph = true;
  if (v.kind == VariantKind::no_iter) o.outer_iters = 0;
  if (v.kind == VariantKind::n_iter) o.outer_iters = v.n;
  return o;
}

inline void check_config(const RunConfig& c) {
  auto bad = [](const std::string& key, const std::string& why) { throw ConfigError("config key '" + key + "': " + why); };
  if (c.dim == 0) bad("dim", "must be >= 1");
  if (c.fc_dim == 0) bad("fc_dim", "must be >= 1");
  if (c.batch_size == 0) bad("batch_size", "must be >= 1");
  if (c.k_options == 0) bad("k_options", "must be >= 1");
  if (!(c.lr_base >= 0.0)) bad("lr_base", "must be >= 0");
  if (!(c.lr_floor >= 0.0)) bad("lr_floor", "must be >= 0");
  try {
    parse_variant(c.variant);
  } catch (const ConfigError& e) {
    bad("variant", e.what());
  }
  try {
    data::parse_task(c.mode);
  } catch (const ConfigError& e) {
    bad("mode", e.what());
  }
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"dim", c.dim},
          {"fc_dim", c.fc_dim},
          {"outer_iters", c.outer_iters},
          {"inner_steps", c.inner_steps},
          {"variant", c.variant},
          {"batch_size", c.batch_size},
          {"lr_base", c.lr_base},
          {"lr_floor", c.lr_floor},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"k_options", c.k_options},
          {"mode", c.mode}};
}

/// Every key is required and unknown keys are rejected.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const RunConfig defaults;
  const auto keys = to_json(defaults);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.contains(it.key())) throw ConfigError("config key '" + it.key() + "' is not recognized");
  }
  for (auto it = keys.begin(); it != keys.end(); ++it) {
    if (!j.contains(it.key())) throw ConfigError("config key '" + it.key() + "' is missing");
  }
  RunConfig c;
  auto get = [&](const char* key, auto& out) {
    const auto& v = j.at(key);
    using T = std::decay_t<decltype(out)>;
    bool ok;
    if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else {
      ok = v.is_number_unsigned();
    }
    if (!ok) throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    out = v.get<T>();
  };
  get("dim", c.dim);
  get("fc_dim", c.fc_dim);
  get("outer_iters", c.outer_iters);
  get("inner_steps", c.inner_steps);
  get("variant", c.variant);
  get("batch_size", c.batch_size);
  get("lr_base", c.lr_base);
  get("lr_floor", c.lr_floor);
  get("epochs", c.epochs);
  get("seed", c.seed);
  get("k_options", c.k_options);
  get("mode", c.mode);
  check_config(c);
  return c;
}

/// EMGNN_SEED, when set, replaces the configured seed.
inline void apply_env_seed(RunConfig& c) {
  const char* s = std::getenv("EMGNN_SEED");
  if (!s || !*s) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("EMGNN_SEED '") + s + "' is not an unsigned integer");
  c.seed = v;
}

}  // namespace emgnn::train
