#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "classic/data/synthetic.hpp"
#include "classic/harness/learner.hpp"
#include "classic/harness/metrics.hpp"
#include "classic/model/checkpoint.hpp"

namespace classic::harness {

struct DataSource {
  /// "synthetic", or a directory holding <task>/{train,valid,test}.jsonl.
  std::string source;
  data::SyntheticSpec synthetic;
  /// Use only the first max_tasks tasks (sorted by name); 0 keeps all.
  std::size_t max_tasks = 0;
};

struct RunConfig {
  model::ModelConfig model;
  TrainingConfig training;
  DataSource data;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  /// Each seed trains the tasks in its own random order.
  bool shuffle_order = true;
  EvalMode mode = EvalMode::kDil;
};

/// Throws ConfigError naming the offending field.
void validate(const RunConfig& config);

std::vector<data::TaskDataset> load_data(const DataSource& source);

nlohmann::json to_json(const RunConfig& config);
/// 16 hex digits of FNV-1a over the canonical config JSON.
std::string config_digest(const RunConfig& config);

/// Task order used by a sequence seed (indices into the suite).
std::vector<std::size_t> task_order(std::size_t n_tasks, std::uint64_t seed, bool shuffle);

struct SequenceOutput {
  SequenceResult result;
  std::string training_log;     // JSONL, empty unless requested
  model::Checkpoint checkpoint;  // empty unless requested
};

/// Trains and scores one sequence. Forward scores are taken right after each
/// task; final scores after the last one (absent for the `one` baseline).
SequenceOutput run_single_sequence(const RunConfig& config, const std::vector<data::TaskDataset>& suite,
                                   std::uint64_t seed, bool keep_artifacts);

struct RunOutputs {
  nlohmann::json metrics;
  std::string training_log;  // sequences concatenated in seed order
  std::vector<std::pair<std::uint64_t, model::Checkpoint>> checkpoints;
};

/// Every configured seed, run in parallel with isolated state, aggregated in
/// seed order.
RunOutputs run_sequence(const RunConfig& config, const std::vector<data::TaskDataset>& suite,
                        bool keep_artifacts = true);

/// Full model plus the seven component ablations, in reference-table order.
std::vector<losses::Ablation> ablation_grid();
/// Published Acc / MF1 for each ablation (BERT-scale, 19 tasks).
nlohmann::json reference_ablation();

/// One run_sequence per ablation with shared seeds; the table lists final
/// scores next to the reference values and reports orderings without
/// asserting them.
nlohmann::json ablate(const RunConfig& config, const std::vector<data::TaskDataset>& suite,
                      const std::vector<losses::Ablation>& grid);

/// Scores a saved run on the test splits of `suite` (matched by task name).
nlohmann::json evaluate_checkpoint(const RunConfig& config, const model::Checkpoint& checkpoint,
                                   const std::vector<data::TaskDataset>& suite, EvalMode mode);

}  // namespace classic::harness
