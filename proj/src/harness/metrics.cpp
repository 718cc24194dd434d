#include "classic/harness/metrics.hpp"

#include <algorithm>
#include <set>

#include "classic/error.hpp"

namespace classic::harness {

namespace {

void check_inputs(const std::vector<int>& predictions, const std::vector<int>& gold, const char* op) {
  if (gold.empty()) throw Error(std::string(op) + ": empty input");
  if (predictions.size() != gold.size()) {
    throw Error(std::string(op) + ": " + std::to_string(predictions.size()) + " predictions for " +
                std::to_string(gold.size()) + " labels");
  }
}

nlohmann::json table_json(const ScoreTable& table) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, s] : table) out[name] = to_json(s);
  return out;
}

TaskScore table_mean(const ScoreTable& table) {
  std::vector<TaskScore> all;
  for (const auto& [_, s] : table) all.push_back(s);
  return mean_score(all);
}

}  // namespace

double accuracy(const std::vector<int>& predictions, const std::vector<int>& gold) {
  check_inputs(predictions, gold, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold) {
  check_inputs(predictions, gold, "macro_f1");
  const std::set<int> classes(gold.begin(), gold.end());
  double total = 0.0;
  for (int c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool p = predictions[i] == c, g = gold[i] == c;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    // F1 = 2tp / (2tp + fp + fn); zero when the class is never hit.
    if (tp > 0) total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return total / static_cast<double>(classes.size());
}

TaskScore score(const std::vector<int>& predictions, const std::vector<int>& gold) {
  return {accuracy(predictions, gold), macro_f1(predictions, gold)};
}

TaskScore mean_score(const std::vector<TaskScore>& scores) {
  TaskScore m;
  if (scores.empty()) return m;
  for (const auto& s : scores) {
    m.acc += s.acc;
    m.mf1 += s.mf1;
  }
  m.acc /= static_cast<double>(scores.size());
  m.mf1 /= static_cast<double>(scores.size());
  return m;
}

nlohmann::json to_json(const TaskScore& s) { return {{"acc", s.acc}, {"mf1", s.mf1}}; }

nlohmann::json SequenceResult::to_json() const {
  nlohmann::json j = {{"seed", seed}, {"order", order}, {"forward", table_json(forward)},
                      {"mean_forward", harness::to_json(table_mean(forward))}};
  if (has_final) {
    j["final"] = table_json(final);
    j["mean_final"] = harness::to_json(table_mean(final));
  }
  return j;
}

nlohmann::json metrics_report(const std::string& config_digest, const nlohmann::json& header,
                              std::vector<SequenceResult> sequences) {
  std::sort(sequences.begin(), sequences.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
  nlohmann::json per_sequence = nlohmann::json::array();
  std::map<std::string, std::vector<TaskScore>> forward, final;
  std::vector<TaskScore> seq_forward, seq_final;
  const bool has_final = !sequences.empty() && sequences.front().has_final;
  for (const auto& s : sequences) {
    per_sequence.push_back(s.to_json());
    for (const auto& [name, sc] : s.forward) forward[name].push_back(sc);
    seq_forward.push_back(table_mean(s.forward));
    if (has_final) {
      for (const auto& [name, sc] : s.final) final[name].push_back(sc);
      seq_final.push_back(table_mean(s.final));
    }
  }
  auto per_task = [](const std::map<std::string, std::vector<TaskScore>>& m) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, v] : m) out[name] = to_json(mean_score(v));
    return out;
  };
  nlohmann::json report = header;
  report["config_digest"] = config_digest;
  report["per_sequence"] = per_sequence;
  report["forward"] = per_task(forward);
  report["final"] = has_final ? per_task(final) : nlohmann::json(nullptr);
  nlohmann::json aggregates = {{"sequences", sequences.size()}, {"forward", to_json(mean_score(seq_forward))}};
  aggregates["final"] = has_final ? to_json(mean_score(seq_final)) : nlohmann::json(nullptr);
  report["aggregates"] = aggregates;
  return report;
}

TaskScore aggregate(const nlohmann::json& report, const std::string& which) {
  const auto& a = report.at("aggregates").at(which);
  if (a.is_null()) throw Error("metrics report has no " + which + " aggregate");
  return {a.at("acc").get<double>(), a.at("mf1").get<double>()};
}

}  // namespace classic::harness
