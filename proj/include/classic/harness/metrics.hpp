#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace classic::harness {

/// Fraction of equal entries. Throws Error on empty or unequal inputs.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& gold);

/// Unweighted mean of per-class F1 over classes present in `gold`. A class
/// never predicted has precision 0. Throws Error on empty or unequal inputs.
double macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold);

struct TaskScore {
  double acc = 0.0;
  double mf1 = 0.0;
};

TaskScore score(const std::vector<int>& predictions, const std::vector<int>& gold);
TaskScore mean_score(const std::vector<TaskScore>& scores);

nlohmann::json to_json(const TaskScore& s);

/// Scores keyed by task name.
using ScoreTable = std::map<std::string, TaskScore>;

/// Results of one task sequence.
struct SequenceResult {
  std::uint64_t seed = 0;
  std::vector<std::string> order;
  ScoreTable forward;  // right after each task was learned
  ScoreTable final;    // after the last task; empty when not applicable
  bool has_final = true;

  nlohmann::json to_json() const;
};

/// Cross-sequence report. Sequences are sorted by seed before averaging.
nlohmann::json metrics_report(const std::string& config_digest, const nlohmann::json& header,
                              std::vector<SequenceResult> sequences);

/// Mean forward / final MF1 and Acc from a metrics_report document.
TaskScore aggregate(const nlohmann::json& report, const std::string& which);

}  // namespace classic::harness
