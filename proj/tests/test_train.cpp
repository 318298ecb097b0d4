#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "emgnn/data/synthetic.hpp"
#include "emgnn/io/checkpoint.hpp"
#include "emgnn/io/files.hpp"
#include "emgnn/train/ablation.hpp"
#include "emgnn/train/adam.hpp"
#include "emgnn/train/config.hpp"
#include "emgnn/train/metrics.hpp"
#include "emgnn/train/model.hpp"
#include "emgnn/train/structure.hpp"
#include "emgnn/train/trainer.hpp"

using namespace emgnn;
using namespace emgnn::train;
namespace fs = std::filesystem;

namespace {

data::DialogDataset small_set(std::size_t n, std::uint64_t seed = 3) {
  data::SyntheticSpec s;
  s.n_dialogs = n;
  s.seed = seed;
  return data::gen_synthetic(s);
}

RunConfig tiny_config() {
  RunConfig c;
  c.dim = 8;
  c.fc_dim = 8;
  c.epochs = 1;
  c.seed = 4;
  return c;
}

std::string checkpoint_bytes(const Model& m) { return io::encode_checkpoint(to_checkpoint(m)); }

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("emgnn_test_train_" + name); }

}  // namespace

TEST(Metrics, ClosedFormExamples) {
  const std::vector<std::size_t> ranks{1, 2, 4};
  const auto m = compute_metrics(ranks);
  EXPECT_NEAR(m.mrr, (1.0 + 0.5 + 0.25) / 3.0, 1e-12);
  EXPECT_NEAR(m.mrr, 0.583333, 1e-6);
  EXPECT_NEAR(m.mean_rank, 7.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.r_at_1, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(m.n_examples, 3u);

  const std::vector<std::size_t> six{6};
  const auto r6 = compute_metrics(six);
  EXPECT_EQ(r6.r_at_5, 0.0);
  EXPECT_EQ(r6.r_at_10, 1.0);
}

TEST(Metrics, NdcgWithRelevance) {
  RankedExample top{1, {1.0, 0.0, 0.0}};
  EXPECT_NEAR(compute_metrics(std::vector<RankedExample>{top}).ndcg, 1.0, 1e-12);
  RankedExample second{2, {0.0, 1.0, 0.0}};
  EXPECT_NEAR(compute_metrics(std::vector<RankedExample>{second}).ndcg, 1.0 / std::log2(3.0), 1e-12);
  RankedExample none{3, {}};
  EXPECT_NEAR(compute_metrics(std::vector<RankedExample>{none}).ndcg, 1.0 / std::log2(4.0), 1e-12);
}

TEST(Metrics, PropertiesOnRandomRankings) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> ranks(1 + rng.uniform_int(40));
    for (auto& r : ranks) r = 1 + rng.uniform_int(20);
    const auto m = compute_metrics(ranks);
    EXPECT_LE(m.r_at_1, m.r_at_5);
    EXPECT_LE(m.r_at_5, m.r_at_10);
    for (double v : {m.mrr, m.r_at_1, m.r_at_10, m.ndcg}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(m.mean_rank, 1.0);
    auto shuffled = ranks;
    rng.shuffle(shuffled);
    const auto p = compute_metrics(shuffled);
    EXPECT_NEAR(p.mrr, m.mrr, 1e-12);
    EXPECT_NEAR(p.ndcg, m.ndcg, 1e-12);
    EXPECT_NEAR(p.mean_rank, m.mean_rank, 1e-12);
  }
  const std::vector<std::size_t> ones(7, 1);
  const auto best = compute_metrics(ones);
  EXPECT_EQ(best.mrr, 1.0);
  EXPECT_EQ(best.mean_rank, 1.0);
}

TEST(Metrics, RejectsEmptyAndZeroRank) {
  EXPECT_THROW(compute_metrics(std::vector<std::size_t>{}), DimensionError);
  EXPECT_THROW(compute_metrics(std::vector<std::size_t>{0}), DimensionError);
}

TEST(Metrics, ReportHasExactKeys) {
  std::vector<RankedExample> ex{{1, {}}, {3, {}}, {2, {}}};
  std::vector<std::size_t> rounds{1, 2, 2};
  const auto j = report_json(ex, rounds);
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  EXPECT_EQ(keys, (std::set<std::string>{"mrr", "r_at_1", "r_at_5", "r_at_10", "mean_rank", "ndcg", "n_examples",
                                         "per_round"}));
  EXPECT_EQ(j["per_round"]["2"]["n_examples"], 2);
  EXPECT_NEAR(j["per_round"]["2"]["mrr"].get<double>(), (1.0 / 3.0 + 0.5) / 2.0, 1e-12);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = Tensor::vector({0.0}, true);
  p.mutable_grad()[0] = 1.0;
  AdamOptions o;
  o.lr_base = 1e-3;
  auto st = make_optimizer({&p}, o);
  ASSERT_TRUE(adam_step({&p}, st));
  EXPECT_NEAR(p[0], -1e-3 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto p = Tensor::vector({0.5, -2.0}, true);
  p.mutable_grad()[0] = 0.0;
  auto st = make_optimizer({&p}, {});
  ASSERT_TRUE(adam_step({&p}, st));
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], -2.0);
}

TEST(Adam, IdenticalStateGivesIdenticalStep) {
  auto a = Tensor::vector({0.1, 0.2, 0.3}, true), b = Tensor::vector({0.1, 0.2, 0.3}, true);
  auto sa = make_optimizer({&a}, {}), sb = make_optimizer({&b}, {});
  for (int k = 0; k < 3; ++k) {
    for (Tensor* t : {&a, &b}) {
      auto g = t->mutable_grad();
      g[0] = 0.3 * k;
      g[1] = -1.0;
      g[2] = 2.0;
    }
    adam_step({&a}, sa);
    adam_step({&b}, sb);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Adam, NonFiniteGradientIsRejected) {
  auto p = Tensor::vector({1.0, 2.0}, true);
  p.mutable_grad()[1] = std::nan("");
  auto st = make_optimizer({&p}, {});
  EXPECT_FALSE(adam_step({&p}, st));
  EXPECT_EQ(st.step, 0u);
  EXPECT_EQ(p[0], 1.0);
}

TEST(Adam, LearningRateDecaysLinearlyToFloor) {
  AdamOptions o;
  o.decay_steps = 11;
  OptimizerState st;
  st.opts = o;
  EXPECT_NEAR(st.learning_rate(), 1e-3, 1e-18);
  st.step = 5;
  EXPECT_NEAR(st.learning_rate(), (1e-3 + 5e-5) / 2.0, 1e-15);
  st.step = 10;
  EXPECT_NEAR(st.learning_rate(), 5e-5, 1e-18);
  st.step = 30;
  EXPECT_NEAR(st.learning_rate(), 5e-5, 1e-18);
}

TEST(Config, JsonRoundTripAndStrictKeys) {
  RunConfig c;
  c.variant = "n_iter:5";
  c.lr_base = 0.002;
  EXPECT_EQ(config_from_json(to_json(c)), c);

  auto missing = to_json(c);
  missing.erase("fc_dim");
  try {
    config_from_json(missing);
    FAIL() << "missing key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("fc_dim"), std::string::npos);
  }
  auto extra = to_json(c);
  extra["lr_bsae"] = 0.1;
  try {
    config_from_json(extra);
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lr_bsae"), std::string::npos);
  }
  auto wrong = to_json(c);
  wrong["epochs"] = "ten";
  EXPECT_THROW(config_from_json(wrong), ConfigError);
  auto bad_variant = to_json(c);
  bad_variant["variant"] = "n_iter:x";
  EXPECT_THROW(config_from_json(bad_variant), ConfigError);
}

TEST(Config, VariantsMapToInferenceSettings) {
  RunConfig c;
  EXPECT_EQ(infer_options(c).outer_iters, 3u);
  c.variant = "const_graph";
  EXPECT_TRUE(infer_options(c).constant_graph);
  c.variant = "no_iter";
  EXPECT_EQ(infer_options(c).outer_iters, 0u);
  c.variant = "n_iter:7";
  EXPECT_EQ(infer_options(c).outer_iters, 7u);
}

TEST(Config, EnvironmentSeedOverrides) {
  RunConfig c;
  ::setenv("EMGNN_SEED", "77", 1);
  apply_env_seed(c);
  EXPECT_EQ(c.seed, 77u);
  ::setenv("EMGNN_SEED", "7x", 1);
  EXPECT_THROW(apply_env_seed(c), ConfigError);
  ::unsetenv("EMGNN_SEED");
  c.seed = 3;
  apply_env_seed(c);
  EXPECT_EQ(c.seed, 3u);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto ds = small_set(1);
  auto c = tiny_config();
  c.lr_base = 0.0;
  c.lr_floor = 0.0;
  const auto res = train::train(ds, c);
  const auto init = Model::init(text::build_vocab(corpus_tokens(ds)), c, 0);
  EXPECT_EQ(checkpoint_bytes(res.model), checkpoint_bytes(init));
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_TRUE(std::isfinite(res.log[0].train_loss));
}

TEST(Train, LossDecreasesOverThirtyEpochs) {
  const auto ds = small_set(50);
  auto c = tiny_config();
  c.epochs = 30;
  c.lr_base = 0.005;
  const auto res = train::train(ds, c);
  ASSERT_EQ(res.log.size(), 30u);
  EXPECT_LT(res.log.back().train_loss, res.log.front().train_loss);
  EXPECT_EQ(res.log.front().lr, 0.005);
  ASSERT_TRUE(res.log.back().val.has_value());
  EXPECT_EQ(res.log.back().val->n_examples, 50u);
}

TEST(Train, SameSeedGivesIdenticalCheckpoint) {
  const auto ds = small_set(12);
  auto c = tiny_config();
  c.epochs = 2;
  const auto a = checkpoint_bytes(train::train(ds, c).model);
  const auto b = checkpoint_bytes(train::train(ds, c).model);
  EXPECT_EQ(a, b);
  c.seed = 5;
  EXPECT_NE(checkpoint_bytes(train::train(ds, c).model), a);
}

TEST(Train, RejectsModeMismatchAndEmptyData) {
  auto c = tiny_config();
  c.mode = "visdialq";
  EXPECT_THROW(train::train(small_set(2), c), ConfigError);
  EXPECT_THROW(train::train(data::DialogDataset{}, tiny_config()), DataError);
}

TEST(Train, ValidationSplitIsLastTenth) {
  EXPECT_EQ(train_dialog_count(500), 450u);
  EXPECT_EQ(train_dialog_count(50), 45u);
  EXPECT_EQ(train_dialog_count(9), 9u);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto m = train::train(small_set(6), tiny_config()).model;
  const auto p = temp_path("rt.ckpt");
  save_model(p.string(), m);
  const auto first = io::read_file(p.string());
  save_model(p.string(), load_model(p.string()));
  EXPECT_EQ(io::read_file(p.string()), first);
  EXPECT_EQ(first.substr(0, 6), "EMGNN1");
  fs::remove(p);
}

TEST(Checkpoint, LoadedModelEvaluatesIdentically) {
  const auto ds = small_set(6);
  const auto m = train::train(ds, tiny_config()).model;
  const auto back = from_checkpoint(io::decode_checkpoint(checkpoint_bytes(m)));
  EXPECT_EQ(evaluate(m, ds).report().dump(), evaluate(back, ds).report().dump());
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = checkpoint_bytes(train::train(small_set(2), tiny_config()).model);
  for (std::size_t pos : {std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x20;
    EXPECT_THROW(io::decode_checkpoint(bad), CheckpointError) << "byte " << pos;
  }
  EXPECT_THROW(io::decode_checkpoint(bytes.substr(0, bytes.size() - 9)), CheckpointError);
  EXPECT_THROW(io::decode_checkpoint("EMGNN2" + bytes.substr(6)), CheckpointError);
}

TEST(Checkpoint, UnknownAndMissingTensorsRejected) {
  auto c = to_checkpoint(train::train(small_set(2), tiny_config()).model);
  auto extra = c;
  extra.tensors.push_back({"enc.bogus", {1}, {0.0}});
  EXPECT_THROW(from_checkpoint(extra), CheckpointError);
  auto missing = c;
  missing.tensors.erase(missing.tensors.begin() + 3);
  EXPECT_THROW(from_checkpoint(missing), CheckpointError);
  auto reshaped = c;
  reshaped.tensors[0].dims = {reshaped.tensors[0].dims[1], reshaped.tensors[0].dims[0]};
  EXPECT_THROW(from_checkpoint(reshaped), CheckpointError);
}

TEST(Evaluate, ExportDoesNotChangeScores) {
  const auto ds = small_set(4);
  const auto m = train::train(ds, tiny_config()).model;
  const auto plain = evaluate(m, ds).report().dump();
  for (const auto& ex : prepare(ds, m.vocab)) {
    Tape tape(false);
    text::EncodeCache cache;
    gnn::DialogGraph g;
    forward(tape, m, ex, cache, &g);
  }
  EXPECT_EQ(evaluate(m, ds).report().dump(), plain);
}

TEST(Evaluate, RoundsAreOneBased) {
  const auto ds = small_set(3);
  const auto r = evaluate(train::train(ds, tiny_config()).model, ds);
  ASSERT_EQ(r.rounds.size(), 30u);
  EXPECT_EQ(r.rounds.front(), 1u);
  EXPECT_EQ(*std::max_element(r.rounds.begin(), r.rounds.end()), 10u);
  EXPECT_EQ(r.report()["per_round"].size(), 10u);
}

TEST(Structure, AucClosedForms) {
  EXPECT_EQ(*auc({0.9, 0.1, 0.2}, {true, false, false}), 1.0);
  EXPECT_EQ(*auc({0.1, 0.9, 0.2}, {true, false, false}), 0.0);
  EXPECT_EQ(*auc({0.5, 0.5}, {true, false}), 0.5);
  EXPECT_FALSE(auc({0.3}, {true}).has_value());
}

TEST(Structure, PerfectScoresBeatPermutationNull) {
  std::vector<StructureSample> s;
  Rng rng(2);
  for (std::size_t d = 0; d < 40; ++d) {
    for (std::size_t t = 2; t < 8; ++t) {
      StructureSample x{d, {}, std::vector<bool>(t, false)};
      const std::size_t dep = rng.uniform_int(t);
      x.labels[dep] = true;
      for (std::size_t j = 0; j < t; ++j) x.weights.push_back(j == dep ? 0.9 : 0.1 / static_cast<double>(t));
      s.push_back(x);
    }
  }
  const auto rep = structure_auc(s, 200);
  EXPECT_EQ(rep.auc, 1.0);
  EXPECT_EQ(rep.n_dialogs, 40u);
  EXPECT_NEAR(rep.null_mean, 0.5, 0.05);
  EXPECT_LT(rep.null_p95, 0.6);
}

TEST(Structure, ConstantGraphScoresChance) {
  const auto ds = small_set(6);
  auto c = tiny_config();
  c.variant = "const_graph";
  const auto rep = structure_auc(structure_samples(train::train(ds, c).model, ds), 0);
  EXPECT_EQ(rep.auc, 0.5);
}

TEST(Ablation, TableCoversRequestedVariants) {
  const auto ds = small_set(10);
  auto c = tiny_config();
  std::vector<std::string> seen;
  const auto t = run_ablation(ds, c, {"full", "no_iter", "n_iter:1"},
                              [&](const AblationRow& r, const TrainResult&) { seen.push_back(r.variant); });
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(seen, (std::vector<std::string>{"full", "no_iter", "n_iter:1"}));
  for (const auto& row : t) EXPECT_EQ(row.metrics.n_examples, 10u);
  const auto text = ablation_text(t);
  EXPECT_NE(text.find("n_iter:1"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  EXPECT_EQ(to_json(t).size(), 3u);
  EXPECT_THROW(run_ablation(ds, c, {"full", "twice"}), ConfigError);
}

TEST(Ablation, SingleVariantEqualsTrainThenEvaluate) {
  const auto ds = small_set(10);
  const auto held = small_set(3, 9);
  const auto c = tiny_config();
  const auto t = run_ablation(ds, held, c, {"full"});
  const auto direct = evaluate(train::train(ds, c).model, held).metrics();
  EXPECT_EQ(to_json(t[0].metrics).dump(), to_json(direct).dump());
}
