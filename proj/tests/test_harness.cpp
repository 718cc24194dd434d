#include <gtest/gtest.h>

#include "classic/cli/config_file.hpp"
#include "classic/error.hpp"
#include "classic/harness/learner.hpp"
#include "classic/harness/metrics.hpp"
#include "classic/harness/sequence.hpp"

using namespace classic;

namespace {

harness::RunConfig small_run() {
  harness::RunConfig c;
  c.model.d_model = 8;
  c.model.n_layers = 1;
  c.model.ffn_dim = 16;
  c.model.vocab_buckets = 128;
  c.training.epochs = 2;
  c.training.batch_size = 8;
  c.data.source = "synthetic";
  c.data.synthetic.n_tasks = 3;
  c.data.synthetic.examples_per_task = 40;
  c.seeds = {1, 2};
  return c;
}

}  // namespace

TEST(Metrics, AlwaysPositiveOnBalancedSet) {
  const std::vector<int> gold{0, 1, 0, 1}, pred{1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(harness::accuracy(pred, gold), 0.5);
  EXPECT_DOUBLE_EQ(harness::macro_f1(pred, gold), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(harness::macro_f1(gold, gold), 1.0);
}

TEST(Metrics, ReportSortsBySeed) {
  harness::SequenceResult a, b;
  a.seed = 2;
  b.seed = 1;
  a.forward["t"] = a.final["t"] = {1.0, 1.0};
  b.forward["t"] = b.final["t"] = {0.0, 0.0};
  const auto r = harness::metrics_report("d", {}, {a, b});
  EXPECT_EQ(r["per_sequence"][0]["seed"], 1);
  EXPECT_DOUBLE_EQ(harness::aggregate(r, "final").mf1, 0.5);
}

TEST(Config, ParsesAndRoundTrips) {
  const auto c = cli::parse_config(
      "[model]\nd_model = 16\n[training]\nepochs = 3  # short\nbaseline = ncl\n[losses]\nablation = -CED\n"
      "[data]\nsource = synthetic\ntasks = 4\n[run]\nseeds = 3, 1\nmode = til\n");
  EXPECT_EQ(c.model.d_model, 16u);
  EXPECT_EQ(c.training.baseline, harness::Baseline::kNcl);
  EXPECT_TRUE(c.training.ablation.no_ced);
  EXPECT_EQ(c.data.synthetic.n_tasks, 4u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 1}));
  EXPECT_EQ(c.mode, harness::EvalMode::kTil);
  const auto again = cli::parse_config(cli::format_config(c));
  EXPECT_EQ(harness::config_digest(c), harness::config_digest(again));
}

TEST(Config, ErrorsNameKeyAndLine) {
  try {
    cli::parse_config("[data]\nsource = synthetic\n[model]\nd_modl = 4\n");
    FAIL();
  } catch (const cli::ConfigFileError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_EQ(e.key(), "model.d_modl");
  }
  try {
    cli::parse_config("[model]\nd_model = 8\n");
    FAIL();
  } catch (const cli::ConfigFileError& e) {
    EXPECT_EQ(e.key(), "data.source");
  }
  EXPECT_THROW(cli::parse_config("[data]\nsource = synthetic\nsource = x\n"), ConfigError);
  EXPECT_THROW(cli::parse_config("[data]\nsource = synthetic\n[training]\nepochs = zero\n"), ConfigError);
  EXPECT_THROW(cli::parse_ablation("-XYZ"), ConfigError);
}

TEST(Learner, ReleasesTrainingDataAndProtects) {
  auto c = small_run();
  harness::ContinualLearner learner(c.model, c.training, 1);
  for (auto& t : harness::load_data(c.data)) learner.add_task(t);
  learner.train_task(1);
  EXPECT_FALSE(learner.holds_training_data(1));
  EXPECT_TRUE(learner.holds_training_data(2));
  EXPECT_THROW(learner.train_task(3), Error);
  EXPECT_EQ(learner.mask_store().task_count(), 1u);
  const auto dil = learner.evaluate(1, harness::EvalMode::kDil);
  EXPECT_GE(dil.acc, 0.0);
}

TEST(Sequence, DeterministicAcrossRuns) {
  const auto c = small_run();
  const auto suite = harness::load_data(c.data);
  const auto a = harness::run_sequence(c, suite, true);
  const auto b = harness::run_sequence(c, suite, true);
  EXPECT_EQ(a.metrics.dump(), b.metrics.dump());
  EXPECT_EQ(a.training_log, b.training_log);
  EXPECT_EQ(a.checkpoints.size(), 2u);
}

TEST(Sequence, CheckpointScoresMatchFinal) {
  const auto c = small_run();
  const auto suite = harness::load_data(c.data);
  const auto run = harness::run_sequence(c, suite, true);
  const auto& [seed, ckpt] = run.checkpoints.front();
  const auto scored = harness::evaluate_checkpoint(c, ckpt, suite, c.mode);
  EXPECT_EQ(scored["per_sequence"][0]["final"], run.metrics["per_sequence"][0]["final"]);
}

TEST(Sequence, OneBaselineHasNoFinal) {
  auto c = small_run();
  c.training.baseline = harness::Baseline::kOne;
  c.seeds = {1};
  const auto run = harness::run_sequence(c, harness::load_data(c.data), false);
  EXPECT_TRUE(run.metrics["aggregates"]["final"].is_null());
}

TEST(Sequence, TaskOrderIsSeededPermutation) {
  const auto a = harness::task_order(6, 1, true), b = harness::task_order(6, 1, true);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(harness::task_order(3, 9, false), (std::vector<std::size_t>{0, 1, 2}));
}
