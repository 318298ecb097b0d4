#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emgnn/data/dataset.hpp"
#include "emgnn/rng.hpp"
#include "emgnn/text/tokenize.hpp"

namespace emgnn::data {

inline const std::vector<std::string>& default_entities() {
  static const std::vector<std::string> v{
      "dog",   "cat",   "car",   "bus",  "tree",  "house", "man",   "woman", "boy",   "girl",
      "horse", "bird",  "boat",  "kite", "ball",  "cup",   "chair", "table", "bench", "sign",
      "truck", "bike",  "plate", "vase", "lamp",  "clock", "phone", "bag",   "hat",   "shirt"};
  return v;
}

inline const std::vector<std::string>& default_attributes() {
  static const std::vector<std::string> v{
      "red",    "blue",  "green",  "yellow", "orange", "purple", "pink",  "brown",
      "black",  "white", "gray",   "silver", "gold",   "beige",  "teal",  "navy",
      "maroon", "olive", "cyan",   "violet", "ivory",  "tan",    "indigo", "crimson"};
  return v;
}

struct SyntheticSpec {
  std::size_t n_dialogs = 500;
  std::size_t rounds = 10;
  std::size_t caption_entities = 1;
  /// Chance that a round asks about an entity an earlier answer introduced
  /// rather than a caption entity.
  double dep_prob = 0.7;
  /// Fresh bindings each answer introduces.
  std::size_t intros = 1;
  std::size_t k_options = 20;
  std::uint64_t seed = 1;
  std::vector<std::string> entities = default_entities();
  std::vector<std::string> attributes = default_attributes();
};

inline void check_spec(const SyntheticSpec& s) {
  if (s.rounds == 0 || s.caption_entities == 0) throw ConfigError("synthetic: rounds and caption_entities must be >= 1");
  if (s.intros == 0) throw ConfigError("synthetic: intros must be >= 1");
  if (s.caption_entities + s.rounds * s.intros > s.entities.size()) {
    throw ConfigError("synthetic: " + std::to_string(s.caption_entities + s.rounds * s.intros) +
                      " entities per dialog but only " +
                      std::to_string(s.entities.size()) + " available");
  }
  if (s.k_options < 1 || s.k_options > s.attributes.size()) {
    throw ConfigError("synthetic: k_options must be in [1, " + std::to_string(s.attributes.size()) + "]");
  }
  if (!(s.dep_prob >= 0.0 && s.dep_prob <= 1.0)) throw ConfigError("synthetic: dep_prob must be in [0, 1]");
}

/// Each dialog binds entities to attributes. The caption states
/// `caption_entities` bindings. Every round asks "what color is the E ?" about
/// one entity not asked before, and its answer "the N is B , the E is A"
/// introduces `intros` fresh bindings N → B before giving the attribute A. Distractor
/// options differ from the answer only in A.
///
/// With probability dep_prob the asked entity is one an earlier answer
/// introduced (planted_deps = that round's node), otherwise a caption entity
/// (planted_deps = 0). When one pool is empty the other is used; with
/// dep_prob 0 caption entities are asked again once all have been asked.
inline DialogDataset gen_synthetic(const SyntheticSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed);
  DialogDataset ds;
  const std::size_t ne = spec.caption_entities + spec.rounds * spec.intros;
  for (std::size_t d = 0; d < spec.n_dialogs; ++d) {
    std::vector<std::size_t> ents(spec.entities.size());
    for (std::size_t k = 0; k < ents.size(); ++k) ents[k] = k;
    rng.shuffle(ents);
    ents.resize(ne);
    std::vector<std::size_t> attr(ne);
    for (auto& a : attr) a = rng.uniform_int(spec.attributes.size());
    auto ent = [&](std::size_t k) { return spec.entities[ents[k]]; };
    auto att = [&](std::size_t k) { return spec.attributes[attr[k]]; };

    Dialog dlg;
    for (std::size_t c = 0; c < spec.caption_entities; ++c) {
      if (c) dlg.caption += " and ";
      dlg.caption += "a " + att(c) + " " + ent(c);
    }
    std::vector<bool> asked(ne, false);
    // Node whose answer introduced each entity.
    std::vector<std::size_t> source(ne, 0);
    for (std::size_t r = 0; r < spec.rounds; ++r) {
      const std::size_t fresh = spec.caption_entities + r * spec.intros;
      std::vector<std::size_t> hist, cap;
      for (std::size_t k = spec.caption_entities; k < fresh; ++k) {
        if (!asked[k]) hist.push_back(k);
      }
      for (std::size_t k = 0; k < spec.caption_entities; ++k) {
        if (!asked[k]) cap.push_back(k);
      }
      if (cap.empty() && (hist.empty() || spec.dep_prob == 0.0)) {
        for (std::size_t k = 0; k < spec.caption_entities; ++k) cap.push_back(k);
      }
      const bool from_history = !hist.empty() && (cap.empty() || rng.bernoulli(spec.dep_prob));
      const auto& pool = from_history ? hist : cap;
      const std::size_t x = pool[rng.uniform_int(pool.size())];
      asked[x] = true;
      std::string stem;
      for (std::size_t k = fresh; k < fresh + spec.intros; ++k) {
        source[k] = r + 1;
        stem += "the " + ent(k) + " is " + att(k) + " , ";
      }
      stem += "the " + ent(x) + " is ";

      Round rd;
      rd.question = "what color is the " + ent(x) + " ?";
      rd.planted_deps = std::vector<std::size_t>{from_history ? source[x] : 0};
      rd.answer = stem + att(x);
      std::vector<std::size_t> others;
      for (std::size_t a = 0; a < spec.attributes.size(); ++a) {
        if (a != attr[x]) others.push_back(a);
      }
      rng.shuffle(others);
      std::vector<std::size_t> opts{attr[x]};
      opts.insert(opts.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(spec.k_options - 1));
      rng.shuffle(opts);
      for (std::size_t o = 0; o < opts.size(); ++o) {
        rd.options.push_back(stem + spec.attributes[opts[o]]);
        if (opts[o] == attr[x]) rd.gt_index = o;
      }
      dlg.rounds.push_back(std::move(rd));
    }
    ds.dialogs.push_back(std::move(dlg));
  }
  validate(ds);
  return ds;
}

namespace detail {

/// entity → attribute bindings stated in generator text as "a A E" or
/// "the E is A". The first statement of an entity wins.
inline std::map<std::string, std::string> bindings(const std::string& text) {
  std::map<std::string, std::string> out;
  const auto t = text::tokenize(text, 1000);
  for (std::size_t k = 0; k + 2 < t.size(); ++k) {
    if (t[k] == "a" && t[k + 1] != "color") out.emplace(t[k + 2], t[k + 1]);
    if (t[k] == "the" && k + 3 < t.size() && t[k + 2] == "is") out.emplace(t[k + 1], t[k + 3]);
  }
  return out;
}

inline std::string asked_entity(const std::string& question) {
  const auto t = text::tokenize(question, 1000);
  return t.size() >= 2 ? t[t.size() - 2] : std::string();
}

/// First option whose final token is `value`, else `fallback`.
inline std::size_t option_index(const Round& rd, const std::string& value, std::size_t fallback) {
  for (std::size_t o = 0; o < rd.options.size(); ++o) {
    const auto t = text::tokenize(rd.options[o], 1000);
    if (!t.empty() && t.back() == value) return o;
  }
  return fallback;
}

inline std::string node_text(const Dialog& dlg, std::size_t node) {
  if (node == 0) return dlg.caption;
  const auto& rd = dlg.rounds.at(node - 1);
  return rd.question + " " + rd.answer;
}

}  // namespace detail

/// Option the generator's answer function picks after reading the planted
/// dependency nodes.
inline std::size_t generator_oracle(const DialogDataset& ds, std::size_t d, std::size_t r) {
  const auto& dlg = ds.dialogs.at(d);
  const auto& rd = dlg.rounds.at(r);
  if (!rd.planted_deps) throw DataError("generator oracle: round has no planted_deps");
  const std::string e = detail::asked_entity(rd.question);
  for (std::size_t node : *rd.planted_deps) {
    const auto b = detail::bindings(detail::node_text(dlg, node));
    const auto it = b.find(e);
    if (it != b.end()) return detail::option_index(rd, it->second, 0);
  }
  return 0;
}

/// Sees only the caption and the current question; falls back to the first
/// option when neither binds the asked entity.
inline std::size_t history_blind_oracle(const DialogDataset& ds, std::size_t d, std::size_t r) {
  const auto& dlg = ds.dialogs.at(d);
  const auto b = detail::bindings(dlg.caption);
  const auto it = b.find(detail::asked_entity(dlg.rounds.at(r).question));
  return it == b.end() ? 0 : detail::option_index(dlg.rounds[r], it->second, 0);
}

/// Relabels every dialog for next-question ranking: example r keeps QA pairs
/// 1..r as history and ranks candidate questions for round r+1. Candidates
/// are drawn from the dataset's question pool. Dialogs with fewer than two
/// rounds are dropped and counted in `skipped`.
inline DialogDataset to_visdialq(const DialogDataset& ds, std::size_t k_options, std::uint64_t seed,
                                 std::size_t* skipped = nullptr) {
  if (ds.task != Task::visdial) throw DataError("to_visdialq: dataset is already in visdialq form");
  if (k_options < 1) throw ConfigError("to_visdialq: k_options must be >= 1");
  std::vector<std::string> pool;
  {
    std::map<std::string, bool> seen;
    for (const auto& d : ds.dialogs) {
      for (const auto& r : d.rounds) {
        if (seen.emplace(r.question, true).second) pool.push_back(r.question);
      }
    }
  }
  Rng rng(seed);
  DialogDataset out;
  out.task = Task::visdialq;
  std::size_t dropped = 0;
  for (const auto& d : ds.dialogs) {
    if (d.rounds.size() < 2) {
      ++dropped;
      continue;
    }
    Dialog nd;
    nd.caption = d.caption;
    nd.context_feature = d.context_feature;
    for (std::size_t r = 0; r + 1 < d.rounds.size(); ++r) {
      const auto& next = d.rounds[r + 1];
      Round rd;
      rd.question = d.rounds[r].question;
      rd.answer = d.rounds[r].answer;
      rd.target = next.question;
      rd.planted_deps = next.planted_deps;
      const std::size_t k = std::min(k_options, pool.size());
      std::vector<std::string> opts{next.question};
      std::map<std::string, bool> used{{next.question, true}};
      while (opts.size() < k) {
        const auto& q = pool[rng.uniform_int(pool.size())];
        if (used.emplace(q, true).second) opts.push_back(q);
      }
      rng.shuffle(opts);
      for (std::size_t o = 0; o < opts.size(); ++o) {
        if (opts[o] == next.question) rd.gt_index = o;
      }
      rd.options = std::move(opts);
      nd.rounds.push_back(std::move(rd));
    }
    out.dialogs.push_back(std::move(nd));
  }
  if (skipped) *skipped = dropped;
  validate(out);
  return out;
}

}  // namespace emgnn::data
