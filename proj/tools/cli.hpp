#pragma once

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emgnn/data/dataset.hpp"
#include "emgnn/data/synthetic.hpp"
#include "emgnn/error.hpp"
#include "emgnn/gnn/export.hpp"
#include "emgnn/io/files.hpp"
#include "emgnn/train/ablation.hpp"
#include "emgnn/train/config.hpp"
#include "emgnn/train/model.hpp"
#include "emgnn/train/structure.hpp"
#include "emgnn/train/trainer.hpp"
#include "emgnn/verify.hpp"

namespace emgnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitVerify = 4;

/// Thrown by a command to finish with a specific exit code.
struct Exit {
  int code;
};

/// Flags mirroring every RunConfig key. Without --config the defaults below
/// are the run's configuration; with it, the file must hold every key and
/// flags given explicitly override it.
struct ConfigFlags {
  std::string path;
  train::RunConfig values;
  std::vector<CLI::Option*> options;

  void add(CLI::App& app) {
    const train::RunConfig d;
    options = {
        app.add_option("--dim", values.dim, "state and embedding size")->default_val(d.dim),
        app.add_option("--fc-dim", values.fc_dim, "hidden size of the link function")->default_val(d.fc_dim),
        app.add_option("--outer-iters", values.outer_iters, "EM iterations")->default_val(d.outer_iters),
        app.add_option("--inner-steps", values.inner_steps, "message-passing steps per iteration")
            ->default_val(d.inner_steps),
        app.add_option("--variant", values.variant, "full, const_graph, no_iter or n_iter:N")->default_val(d.variant),
        app.add_option("--batch-size", values.batch_size, "rounds per optimizer step")->default_val(d.batch_size),
        app.add_option("--lr-base", values.lr_base, "initial learning rate")->default_val(d.lr_base),
        app.add_option("--lr-floor", values.lr_floor, "final learning rate")->default_val(d.lr_floor),
        app.add_option("--epochs", values.epochs, "passes over the training split")->default_val(d.epochs),
        app.add_option("--seed", values.seed, "initialization and shuffling seed (EMGNN_SEED overrides)")
            ->default_val(d.seed),
        app.add_option("--k-options", values.k_options, "candidate options per round")->default_val(d.k_options),
        app.add_option("--mode", values.mode, "visdial or visdialq")->default_val(d.mode),
    };
    app.add_option("--config", path, "RunConfig JSON with every key");
  }

  train::RunConfig resolve() const {
    train::RunConfig c = values;
    if (!path.empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(io::read_file(path));
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
      c = train::config_from_json(j);
      const train::RunConfig& v = values;
      auto given = [&](std::size_t k) { return options[k]->count() > 0; };
      if (given(0)) c.dim = v.dim;
      if (given(1)) c.fc_dim = v.fc_dim;
      if (given(2)) c.outer_iters = v.outer_iters;
      if (given(3)) c.inner_steps = v.inner_steps;
      if (given(4)) c.variant = v.variant;
      if (given(5)) c.batch_size = v.batch_size;
      if (given(6)) c.lr_base = v.lr_base;
      if (given(7)) c.lr_floor = v.lr_floor;
      if (given(8)) c.epochs = v.epochs;
      if (given(9)) c.seed = v.seed;
      if (given(10)) c.k_options = v.k_options;
      if (given(11)) c.mode = v.mode;
    }
    train::apply_env_seed(c);
    train::check_config(c);
    return c;
  }
};

/// Loads a dataset and converts it to the requested task when it is stored
/// as answer ranking.
inline data::DialogDataset load_for_task(const std::string& path, data::Task task, std::ostream& err) {
  auto ds = data::load_dataset(path);
  if (ds.task == task) return ds;
  if (task == data::Task::visdial) {
    throw ConfigError("dataset '" + path + "' is next-question ranking and cannot be evaluated as visdial");
  }
  std::size_t skipped = 0;
  auto q = data::to_visdialq(ds, ds.dialogs.empty() || ds.dialogs[0].rounds.empty() ? 1 : ds.dialogs[0].rounds[0].options.size(),
                             1, &skipped);
  if (skipped) err << "warning: " << skipped << " dialogs with fewer than 2 rounds skipped\n";
  return q;
}

inline void cmd_train(const std::string& data_path, const ConfigFlags& cfg_flags, const std::string& out,
                      std::string log_path, bool quiet, std::ostream& os, std::ostream& err) {
  const auto cfg = cfg_flags.resolve();
  const auto ds = load_for_task(data_path, data::parse_task(cfg.mode), err);
  if (log_path.empty()) log_path = out + ".log.jsonl";
  std::string log;
  auto res = train::train(ds, cfg, [&](const train::EpochLog& e) {
    const std::string line = train::to_json(e).dump();
    log += line + "\n";
    if (!quiet) os << line << "\n" << std::flush;
  });
  train::save_model(out, res.model);
  io::write_file_atomic(log_path, log);
}

inline std::size_t oracle_pick(const std::string& oracle, const data::DialogDataset& ds, std::size_t d,
                               std::size_t r) {
  return oracle == "generator" ? data::generator_oracle(ds, d, r) : data::history_blind_oracle(ds, d, r);
}

inline void cmd_eval(const std::string& ckpt, const std::string& data_path, const std::string& mode,
                     const std::string& report, const std::string& oracle, std::ostream& os, std::ostream& err) {
  train::EvalResult res;
  if (!oracle.empty()) {
    const auto ds = data::load_dataset(data_path);
    if (ds.task != data::Task::visdial) throw ConfigError("--oracle needs an answer-ranking dataset");
    for (std::size_t d = 0; d < ds.dialogs.size(); ++d) {
      for (std::size_t r = 0; r < ds.dialogs[d].rounds.size(); ++r) {
        const auto& rd = ds.dialogs[d].rounds[r];
        if (!rd.planted_deps) throw DataError("dialog " + std::to_string(d) + " round " + std::to_string(r) +
                                              " field 'planted_deps': needed by the oracle");
        const std::size_t pick = oracle_pick(oracle, ds, d, r);
        train::RankedExample ex;
        ex.rank = pick == rd.gt_index ? 1 : 2;
        res.ranked.push_back(ex);
        res.rounds.push_back(r + 1);
      }
    }
  } else {
    if (ckpt.empty()) throw ConfigError("--ckpt is required unless --oracle is given");
    const auto m = train::load_model(ckpt);
    const data::Task task = mode.empty() ? m.mode : data::parse_task(mode);
    if (task != m.mode) {
      throw ConfigError("--mode " + data::task_name(task) + " but the checkpoint was trained for " +
                        data::task_name(m.mode));
    }
    res = train::evaluate(m, load_for_task(data_path, task, err));
  }
  const auto j = res.report();
  io::write_file_atomic(report, j.dump(2) + "\n");
  os << train::to_json(res.metrics()).dump() << "\n";
}

inline void cmd_infer(const std::string& ckpt, const std::string& data_path, std::size_t dialog, std::size_t round,
                      const std::string& export_path, std::ostream& os, std::ostream& err) {
  const auto m = train::load_model(ckpt);
  const auto ds = load_for_task(data_path, m.mode, err);
  if (dialog >= ds.dialogs.size()) {
    throw ConfigError("--dialog " + std::to_string(dialog) + " out of range (" + std::to_string(ds.dialogs.size()) +
                      " dialogs)");
  }
  const auto& dlg = ds.dialogs[dialog];
  if (round < 1 || round > dlg.rounds.size()) {
    throw ConfigError("--round " + std::to_string(round) + " out of range 1.." + std::to_string(dlg.rounds.size()));
  }
  if (!export_path.empty() && !io::has_suffix(export_path, ".json") && !io::has_suffix(export_path, ".dot")) {
    throw ConfigError("--export-structure must end in .json or .dot");
  }
  if (!export_path.empty() && m.infer.outer_iters == 0) {
    throw ConfigError("checkpoint runs no EM iteration, so there are no edge weights to export");
  }
  const auto ex = train::prepare_example(data::model_view(ds, dialog, round - 1), m.vocab, ds.task);
  ad::Tape tape(false);
  text::EncodeCache cache;
  gnn::DialogGraph g;
  const ad::Tensor scores = train::forward(tape, m, ex, cache, &g);
  const auto probs = ad::softmax_values(scores.values());
  const auto& options = dlg.rounds[round - 1].options;
  os << ex.text.labels.back() << "\n";
  std::size_t pos = 0;
  char buf[64];
  for (std::size_t o : gnn::ranking(scores.values())) {
    std::snprintf(buf, sizeof buf, "%3zu  %.6f  ", ++pos, probs[o]);
    os << buf << options[o] << (o == ex.gt_index ? "  [gt]" : "") << "\n";
  }
  if (export_path.empty()) return;
  const std::string body =
      io::has_suffix(export_path, ".dot") ? gnn::structure_dot(g) : gnn::structure_json(g).dump(2) + "\n";
  io::write_file_atomic(export_path, body);
}

inline int cmd_verify(const std::string& suite, std::ostream& os) {
  const auto rep = verify::run_suite(suite);
  os << rep.table();
  os << (rep.passed() ? "all checks passed\n" : "verification FAILED\n");
  return rep.passed() ? kExitOk : kExitVerify;
}

struct GenFlags {
  data::SyntheticSpec spec;
  bool visdialq = false;
};

inline void cmd_gen(const GenFlags& g, const std::string& out, std::ostream& os, std::ostream& err) {
  auto ds = data::gen_synthetic(g.spec);
  if (g.visdialq) {
    std::size_t skipped = 0;
    ds = data::to_visdialq(ds, g.spec.k_options, g.spec.seed, &skipped);
    if (skipped) err << "warning: " << skipped << " dialogs with fewer than 2 rounds skipped\n";
  }
  data::save_dataset(out, ds);
  os << "wrote " << ds.dialogs.size() << " dialogs, " << ds.num_examples() << " examples\n";
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline void cmd_ablate(const std::string& data_path, const std::string& eval_path, const ConfigFlags& cfg_flags,
                       const std::string& variants, const std::string& out, std::ostream& os, std::ostream& err) {
  const auto cfg = cfg_flags.resolve();
  const auto task = data::parse_task(cfg.mode);
  const auto ds = load_for_task(data_path, task, err);
  const auto names = split_list(variants);
  train::AblationTable table;
  auto progress = [&](const train::AblationRow& row, const train::TrainResult&) {
    err << "trained " << row.variant << ": mrr " << row.metrics.mrr << "\n";
  };
  if (eval_path.empty()) {
    table = train::run_ablation(ds, cfg, names, progress);
  } else {
    table = train::run_ablation(ds, load_for_task(eval_path, task, err), cfg, names, progress);
  }
  os << train::ablation_text(table);
  if (!out.empty()) io::write_file_atomic(out, train::to_json(table).dump(2) + "\n");
}

inline void cmd_structure(const std::string& ckpt, const std::string& data_path, std::size_t draws,
                          const std::string& report, std::ostream& os, std::ostream& err) {
  const auto m = train::load_model(ckpt);
  const auto ds = load_for_task(data_path, m.mode, err);
  const auto rep = train::structure_auc(train::structure_samples(m, ds), draws);
  const auto j = train::to_json(rep);
  if (!report.empty()) io::write_file_atomic(report, j.dump(2) + "\n");
  os << j.dump() << "\n";
}

/// Parses and runs one command; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"EM/GNN dialog structure inference"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  std::string data_path, out, ckpt, report, log_path, mode, oracle, export_path, eval_path;
  std::string variants = "full,const_graph,no_iter";
  std::string suite = "all";
  bool quiet = false;
  std::size_t dialog = 0, round = 1, draws = 1000;

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  ConfigFlags train_cfg;
  train_cmd->add_option("--data", data_path, "dataset (.json or .json.gz)")->required();
  train_cmd->add_option("--out", out, "checkpoint path")->required();
  train_cmd->add_option("--log", log_path, "per-epoch JSON lines (default OUT.log.jsonl)");
  train_cmd->add_flag("--quiet", quiet, "do not echo the epoch log");
  train_cfg.add(*train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "rank every round and write a metrics report");
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint");
  eval_cmd->add_option("--data", data_path, "dataset")->required();
  eval_cmd->add_option("--mode", mode, "visdial or visdialq (default: the checkpoint's)");
  eval_cmd->add_option("--report", report, "metrics JSON path")->required();
  eval_cmd->add_option("--oracle", oracle, "score an oracle instead of a model")
      ->check(CLI::IsMember({"generator", "history_blind"}));

  auto* infer_cmd = app.add_subcommand("infer", "rank one round and export its inferred structure");
  infer_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  infer_cmd->add_option("--data", data_path, "dataset")->required();
  infer_cmd->add_option("--dialog", dialog, "dialog index (0-based)")->default_val(0);
  infer_cmd->add_option("--round", round, "round t (1-based)")->default_val(1);
  infer_cmd->add_option("--export-structure", export_path, "edge weights as .json or .dot");

  auto* verify_cmd = app.add_subcommand("verify", "run verification suites");
  verify_cmd->add_option("--suite", suite, "gradcheck, mrf, graph or all")->default_val("all");

  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic dataset");
  GenFlags gen;
  gen_cmd->add_option("--out", out, "dataset path (.json or .json.gz)")->required();
  gen_cmd->add_option("--dialogs", gen.spec.n_dialogs, "dialogs")->default_val(gen.spec.n_dialogs);
  gen_cmd->add_option("--rounds", gen.spec.rounds, "rounds per dialog")->default_val(gen.spec.rounds);
  gen_cmd->add_option("--caption-entities", gen.spec.caption_entities, "bindings stated by the caption")
      ->default_val(gen.spec.caption_entities);
  gen_cmd->add_option("--dep-prob", gen.spec.dep_prob, "chance a round asks about a history entity")
      ->default_val(gen.spec.dep_prob);
  gen_cmd->add_option("--intros", gen.spec.intros, "fresh bindings per answer")->default_val(gen.spec.intros);
  gen_cmd->add_option("--k-options", gen.spec.k_options, "options per round")->default_val(gen.spec.k_options);
  gen_cmd->add_option("--seed", gen.spec.seed, "generator seed")->default_val(gen.spec.seed);
  gen_cmd->add_flag("--visdialq", gen.visdialq, "relabel for next-question ranking");

  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare variants on the same data");
  ConfigFlags ablate_cfg;
  ablate_cmd->add_option("--data", data_path, "training dataset")->required();
  ablate_cmd->add_option("--eval", eval_path, "held-out dataset (default: the validation split)");
  ablate_cmd->add_option("--variants", variants, "comma-separated variants")->default_val(variants);
  ablate_cmd->add_option("--out", out, "table as JSON");
  ablate_cfg.add(*ablate_cmd);

  auto* structure_cmd = app.add_subcommand("structure", "AUC of inferred edges against planted dependencies");
  structure_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  structure_cmd->add_option("--data", data_path, "dataset with planted_deps")->required();
  structure_cmd->add_option("--null-draws", draws, "label permutations for the null")->default_val(draws);
  structure_cmd->add_option("--report", report, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, os, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) cmd_train(data_path, train_cfg, out, log_path, quiet, os, err);
    if (*eval_cmd) cmd_eval(ckpt, data_path, mode, report, oracle, os, err);
    if (*infer_cmd) cmd_infer(ckpt, data_path, dialog, round, export_path, os, err);
    if (*verify_cmd) return cmd_verify(suite, os);
    if (*gen_cmd) cmd_gen(gen, out, os, err);
    if (*ablate_cmd) cmd_ablate(data_path, eval_path, ablate_cfg, variants, out, os, err);
    if (*structure_cmd) cmd_structure(ckpt, data_path, draws, report, os, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace emgnn::cli
