#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "classic/cli/commands.hpp"
#include "classic/error.hpp"

using namespace classic;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, ExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(cli::guarded([] { return 0; }, err), cli::kExitOk);
  EXPECT_EQ(cli::guarded([]() -> int { throw ConfigError("x"); }, err), cli::kExitUsage);
  EXPECT_EQ(cli::guarded([]() -> int { throw CheckpointError("x"); }, err), cli::kExitUsage);
  EXPECT_EQ(cli::guarded([]() -> int { throw NumericError("x"); }, err), cli::kExitFailure);
}

TEST(Cli, GenDataThenRunFromFiles) {
  const auto dir = scratch("classic_cli_test");
  data::SyntheticSpec spec;
  spec.n_tasks = 2;
  spec.examples_per_task = 40;
  cli::gen_data(spec, dir / "data");
  EXPECT_TRUE(fs::exists(dir / "data" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "data" / "task01" / "train.jsonl"));
  std::ofstream(dir / "run.ini") << "[model]\nd_model = 8\nn_layers = 1\nffn_dim = 16\n[training]\nepochs = 1\n"
                                    "batch_size = 8\n[data]\nsource = "
                                 << (dir / "data").string() << "\n[run]\nseeds = 1\n";
  cli::RunOptions opts;
  opts.config = dir / "run.ini";
  opts.out = dir / "out";
  std::ostringstream info;
  cli::run(opts, info);
  const auto metrics = nlohmann::json::parse(slurp(dir / "out" / "metrics.json"));
  EXPECT_EQ(metrics["per_sequence"].size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoints" / "seed1.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "run_info.json"));
  const auto first_log_row = nlohmann::json::parse(slurp(dir / "out" / "training_log.jsonl").substr(0, slurp(dir / "out" / "training_log.jsonl").find('\n')));
  for (const char* key : {"task", "epoch", "batch", "ce", "csc", "ced", "cks", "total", "s"}) {
    EXPECT_TRUE(first_log_row.contains(key)) << key;
  }

  std::ostringstream report;
  cli::mask_report(dir / "out" / "checkpoints" / "seed1.ckpt", {}, report);
  EXPECT_FALSE(nlohmann::json::parse(report.str()).empty());

  std::ostringstream alpha;
  cli::attention_report(dir / "run.ini", dir / "out" / "checkpoints" / "seed1.ckpt", 4, {}, alpha);
  EXPECT_EQ(nlohmann::json::parse(alpha.str())["tasks"], 2);

  cli::RunOptions eval = opts;
  eval.out = dir / "eval";
  eval.checkpoint = dir / "out" / "checkpoints" / "seed1.ckpt";
  cli::run(eval, info);
  const auto scored = nlohmann::json::parse(slurp(dir / "eval" / "metrics.json"));
  EXPECT_EQ(scored["per_sequence"][0]["final"], metrics["per_sequence"][0]["final"]);

  opts.ablate = "-BOGUS";
  EXPECT_THROW(cli::run(opts, info), ConfigError);
  fs::remove_all(dir);
}

TEST(Cli, GradCheckPassesWithFewTrials) {
  std::ostringstream out;
  EXPECT_EQ(cli::grad_check(2, 5, 1e-4, out), cli::kExitOk) << out.str();
}
