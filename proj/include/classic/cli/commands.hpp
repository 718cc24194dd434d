#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include "classic/data/synthetic.hpp"

namespace classic::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 bad input (config, checkpoint
/// or usage).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs `body`, printing any exception to `err` and mapping it to an exit code.
int guarded(const std::function<int()>& body, std::ostream& err);

/// Writes <out>/<task>/{train,valid,test}.jsonl and <out>/manifest.json.
void gen_data(const data::SyntheticSpec& spec, const std::filesystem::path& out);

struct RunOptions {
  std::filesystem::path config;
  /// "", "all" for the full grid, or an ablation list such as "-CED,-CKS".
  std::string ablate;
  std::optional<std::string> baseline;
  std::optional<std::string> mode;
  std::filesystem::path out;
  /// When set, scores this checkpoint instead of training.
  std::filesystem::path checkpoint;
};

/// Training writes metrics.json, training_log.jsonl, checkpoints/seed<N>.ckpt
/// and run_info.json (wall-clock data kept out of metrics.json). "all"
/// writes ablation.json instead. Checkpoint scoring writes metrics.json.
void run(const RunOptions& options, std::ostream& info);

/// Mask capacity and overlap report of a checkpoint; stdout when out is empty.
void mask_report(const std::filesystem::path& checkpoint, const std::filesystem::path& out, std::ostream& stdout_sink);

/// One line per check; returns kExitOk only if every check passes.
int grad_check(std::size_t trials, std::uint64_t seed, double tolerance, std::ostream& out);

/// Task attention weights on the first `probe` test examples of the first
/// checkpointed task, every stored task mask supplying one view.
void attention_report(const std::filesystem::path& config, const std::filesystem::path& checkpoint,
                      std::size_t probe, const std::filesystem::path& out, std::ostream& stdout_sink);

}  // namespace classic::cli
