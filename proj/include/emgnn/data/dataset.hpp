#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emgnn/error.hpp"
#include "emgnn/io/files.hpp"

namespace emgnn::data {

enum class Task { visdial, visdialq };

inline std::string task_name(Task t) { return t == Task::visdial ? "visdial" : "visdialq"; }

inline Task parse_task(const std::string& s) {
  if (s == "visdial") return Task::visdial;
  if (s == "visdialq") return Task::visdialq;
  throw ConfigError("unknown mode '" + s + "' (expected visdial or visdialq)");
}

struct Round {
  std::string question;
  std::string answer;
  std::vector<std::string> options;
  std::size_t gt_index = 0;
  std::optional<std::vector<double>> relevance;
  /// Evaluation labels only; never part of a model input.
  std::optional<std::vector<std::size_t>> planted_deps;
  /// Next-question mode: the question the options are ranked against.
  std::optional<std::string> target;

  bool operator==(const Round&) const = default;
};

struct Dialog {
  std::string caption;
  std::optional<std::vector<double>> context_feature;
  std::vector<Round> rounds;

  bool operator==(const Dialog&) const = default;
};

struct DialogDataset {
  Task task = Task::visdial;
  std::vector<Dialog> dialogs;

  std::size_t num_examples() const {
    std::size_t n = 0;
    for (const auto& d : dialogs) n += d.rounds.size();
    return n;
  }
  bool operator==(const DialogDataset&) const = default;
};

/// Node count of the graph built for round `r` (0-based): caption, the
/// history rounds, the query. Next-question rounds keep their own QA pair in
/// the history.
inline std::size_t node_count(Task task, std::size_t r) { return task == Task::visdial ? r + 2 : r + 3; }

inline void validate(const DialogDataset& ds) {
  std::optional<std::size_t> ctx_dim;
  for (std::size_t d = 0; d < ds.dialogs.size(); ++d) {
    const auto& dlg = ds.dialogs[d];
    auto fail = [&](std::size_t r, const std::string& field, const std::string& what) {
      throw DataError("dialog " + std::to_string(d) + " round " + std::to_string(r) + " field '" + field +
                      "': " + what);
    };
    if (dlg.context_feature) {
      if (ctx_dim && *ctx_dim != dlg.context_feature->size()) {
        throw DataError("dialog " + std::to_string(d) + " field 'context_feature': length " +
                        std::to_string(dlg.context_feature->size()) + ", earlier dialogs use " +
                        std::to_string(*ctx_dim));
      }
      ctx_dim = dlg.context_feature->size();
    } else if (ctx_dim && *ctx_dim != 0) {
      throw DataError("dialog " + std::to_string(d) + " field 'context_feature': missing");
    } else {
      ctx_dim = 0;
    }
    for (std::size_t r = 0; r < dlg.rounds.size(); ++r) {
      const auto& rd = dlg.rounds[r];
      const std::size_t k = rd.options.size();
      if (k == 0) fail(r, "options", "empty");
      if (rd.gt_index >= k) {
        fail(r, "gt_index", std::to_string(rd.gt_index) + " out of range for " + std::to_string(k) + " options");
      }
      if (ds.task == Task::visdial && rd.options[rd.gt_index] != rd.answer) {
        fail(r, "gt_index", "options[gt_index] differs from answer");
      }
      if (ds.task == Task::visdialq) {
        if (!rd.target) fail(r, "target", "missing in visdialq dataset");
        if (rd.options[rd.gt_index] != *rd.target) fail(r, "gt_index", "options[gt_index] differs from target");
      }
      if (rd.relevance) {
        if (rd.relevance->size() != k) {
          fail(r, "relevance", "length " + std::to_string(rd.relevance->size()) + " for " + std::to_string(k) +
                                   " options");
        }
        for (double v : *rd.relevance) {
          if (!(v >= 0.0 && v <= 1.0)) fail(r, "relevance", "entry outside [0, 1]");
        }
      }
      if (rd.planted_deps) {
        for (std::size_t v : *rd.planted_deps) {
          if (v >= node_count(ds.task, r)) {
            fail(r, "planted_deps", "node " + std::to_string(v) + " out of range for " +
                                        std::to_string(node_count(ds.task, r)) + " nodes");
          }
        }
      }
    }
  }
}

inline nlohmann::json to_json(const DialogDataset& ds) {
  nlohmann::json j;
  j["task"] = task_name(ds.task);
  auto& dialogs = j["dialogs"] = nlohmann::json::array();
  for (const auto& d : ds.dialogs) {
    nlohmann::json jd;
    jd["caption"] = d.caption;
    if (d.context_feature) jd["context_feature"] = *d.context_feature;
    auto& rounds = jd["rounds"] = nlohmann::json::array();
    for (const auto& r : d.rounds) {
      nlohmann::json jr;
      jr["question"] = r.question;
      jr["answer"] = r.answer;
      jr["options"] = r.options;
      jr["gt_index"] = r.gt_index;
      if (r.relevance) jr["relevance"] = *r.relevance;
      if (r.planted_deps) jr["planted_deps"] = *r.planted_deps;
      if (r.target) jr["target"] = *r.target;
      rounds.push_back(std::move(jr));
    }
    dialogs.push_back(std::move(jd));
  }
  return j;
}

inline DialogDataset from_json(const nlohmann::json& j) {
  DialogDataset ds;
  std::size_t d = 0, r = 0;
  std::string field = "dialogs";
  try {
    if (j.contains("task")) ds.task = parse_task(j.at("task").get<std::string>());
    for (const auto& jd : j.at("dialogs")) {
      Dialog dlg;
      field = "caption";
      dlg.caption = jd.at("caption").get<std::string>();
      if (jd.contains("context_feature")) {
        field = "context_feature";
        dlg.context_feature = jd.at("context_feature").get<std::vector<double>>();
      }
      field = "rounds";
      r = 0;
      for (const auto& jr : jd.at("rounds")) {
        Round rd;
        field = "question";
        rd.question = jr.at("question").get<std::string>();
        field = "answer";
        rd.answer = jr.at("answer").get<std::string>();
        field = "options";
        rd.options = jr.at("options").get<std::vector<std::string>>();
        field = "gt_index";
        rd.gt_index = jr.at("gt_index").get<std::size_t>();
        if (jr.contains("relevance")) {
          field = "relevance";
          rd.relevance = jr.at("relevance").get<std::vector<double>>();
        }
        if (jr.contains("planted_deps")) {
          field = "planted_deps";
          rd.planted_deps = jr.at("planted_deps").get<std::vector<std::size_t>>();
        }
        if (jr.contains("target")) {
          field = "target";
          rd.target = jr.at("target").get<std::string>();
        }
        dlg.rounds.push_back(std::move(rd));
        ++r;
      }
      ds.dialogs.push_back(std::move(dlg));
      ++d;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dialog " + std::to_string(d) + " round " + std::to_string(r) + " field '" + field +
                    "': " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("field 'task': ") + e.what());
  }
  validate(ds);
  return ds;
}

inline DialogDataset parse_dataset(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("dataset is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

/// Reads .json or .json.gz and validates every invariant eagerly.
inline DialogDataset load_dataset(const std::string& path) { return parse_dataset(io::read_file(path)); }

inline void save_dataset(const std::string& path, const DialogDataset& ds) {
  io::write_file_atomic(path, to_json(ds).dump());
}

/// What the model may see of one round; planted_deps has no slot here.
struct ExampleView {
  std::size_t dialog = 0;
  std::size_t round = 0;
  std::string caption;
  std::vector<std::pair<std::string, std::string>> history;
  std::string query;
  std::vector<std::string> options;
  std::size_t gt_index = 0;
  std::optional<std::vector<double>> relevance;
  std::optional<std::vector<double>> context;
};

/// Next-question rounds put their own QA pair in the history and seed the
/// query node from the caption.
inline ExampleView model_view(const DialogDataset& ds, std::size_t d, std::size_t r) {
  const auto& dlg = ds.dialogs.at(d);
  const auto& rd = dlg.rounds.at(r);
  ExampleView v;
  v.dialog = d;
  v.round = r;
  v.caption = dlg.caption;
  const std::size_t hist = ds.task == Task::visdial ? r : r + 1;
  for (std::size_t k = 0; k < hist; ++k) v.history.emplace_back(dlg.rounds[k].question, dlg.rounds[k].answer);
  v.query = ds.task == Task::visdial ? rd.question : dlg.caption;
  v.options = rd.options;
  v.gt_index = rd.gt_index;
  v.relevance = rd.relevance;
  v.context = dlg.context_feature;
  return v;
}

}  // namespace emgnn::data
