#include "classic/harness/sequence.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <map>
#include <sstream>

#include "classic/data/jsonl.hpp"
#include "classic/error.hpp"

namespace classic::harness {

namespace {

constexpr std::uint64_t kOrderSalt = 0x6f72646572;

std::string reduction_name(losses::Reduction r) { return r == losses::Reduction::kSum ? "sum" : "mean"; }

nlohmann::json header_for(const RunConfig& config) {
  return {{"baseline", to_string(config.training.baseline)},
          {"mode", to_string(config.mode)},
          {"ablation", config.training.ablation.label()}};
}

}  // namespace

void validate(const RunConfig& config) {
  model::validate(config.model);
  validate(config.training);
  if (config.seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
  if (config.data.source.empty()) throw ConfigError("data.source is required");
  if (config.data.source == "synthetic") data::validate(config.data.synthetic);
}

std::vector<data::TaskDataset> load_data(const DataSource& source) {
  std::vector<data::TaskDataset> suite = source.source == "synthetic"
                                             ? data::generate_synthetic_suite(source.synthetic)
                                             : data::load_suite(source.source);
  if (source.max_tasks > 0 && suite.size() > source.max_tasks) suite.resize(source.max_tasks);
  if (suite.empty()) throw DataError("no tasks found in " + source.source);
  return suite;
}

nlohmann::json to_json(const RunConfig& c) {
  const TrainingConfig& t = c.training;
  nlohmann::json model = model::to_json(c.model);
  nlohmann::json training = {{"epochs", t.epochs},
                             {"batch_size", t.batch_size},
                             {"learning_rate", t.learning_rate},
                             {"s_max", t.s_max},
                             {"mask_threshold", t.mask_threshold},
                             {"embedding_clip", t.embedding_clip},
                             {"teacher_grad", t.teacher_grad},
                             {"early_stop", t.early_stop},
                             {"patience", t.patience},
                             {"baseline", to_string(t.baseline)}};
  nlohmann::json loss = {{"lambda_csc", t.weights.csc},
                         {"lambda_ced", t.weights.ced},
                         {"lambda_cks", t.weights.cks},
                         {"temperature", t.weights.temperature},
                         {"reduction", reduction_name(t.reduction)},
                         {"ablation", t.ablation.label()}};
  nlohmann::json data = {{"source", c.data.source}, {"max_tasks", c.data.max_tasks}};
  if (c.data.source == "synthetic") {
    data["seed"] = c.data.synthetic.seed;
    data["tasks"] = c.data.synthetic.n_tasks;
    data["per_task"] = c.data.synthetic.examples_per_task;
    data["flip"] = c.data.synthetic.flip_fraction;
    data["classes"] = c.data.synthetic.n_classes;
  }
  nlohmann::json run = {{"seeds", c.seeds}, {"shuffle_order", c.shuffle_order}, {"mode", to_string(c.mode)}};
  return {{"model", model}, {"training", training}, {"losses", loss}, {"data", data}, {"run", run}};
}

std::string config_digest(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(config).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::size_t> task_order(std::size_t n_tasks, std::uint64_t seed, bool shuffle) {
  std::vector<std::size_t> order(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) order[i] = i;
  if (shuffle) {
    Rng rng(mix_seed(seed, kOrderSalt));
    rng.shuffle(order);
  }
  return order;
}

SequenceOutput run_single_sequence(const RunConfig& config, const std::vector<data::TaskDataset>& suite,
                                   std::uint64_t seed, bool keep_artifacts) {
  ContinualLearner learner(config.model, config.training, seed);
  SequenceOutput out;
  out.result.seed = seed;
  out.result.has_final = config.training.baseline != Baseline::kOne;
  for (std::size_t index : task_order(suite.size(), seed, config.shuffle_order)) {
    learner.add_task(suite[index]);
    out.result.order.push_back(suite[index].name);
  }
  std::ostringstream log;
  const int n = static_cast<int>(learner.task_count());
  for (int t = 1; t <= n; ++t) {
    learner.train_task(t, keep_artifacts ? &log : nullptr);
    out.result.forward[learner.task_name(t)] = learner.evaluate(t, config.mode);
  }
  if (out.result.has_final) {
    for (int t = 1; t <= n; ++t) out.result.final[learner.task_name(t)] = learner.evaluate(t, config.mode);
  }
  if (keep_artifacts) {
    // Prefix each row with the sequence seed so concatenated logs stay separable.
    std::istringstream rows(log.str());
    std::ostringstream tagged;
    for (std::string line; std::getline(rows, line);) {
      tagged << "{\"seed\":" << seed << "," << line.substr(1) << '\n';
    }
    out.training_log = tagged.str();
    learner.save(out.checkpoint);
    out.checkpoint.meta["run_config"] = to_json(config);
  }
  return out;
}

RunOutputs run_sequence(const RunConfig& config, const std::vector<data::TaskDataset>& suite, bool keep_artifacts) {
  validate(config);
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) throw ConfigError("run.seeds has duplicates");

  std::vector<SequenceOutput> outputs(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  const long n = static_cast<long>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      outputs[static_cast<std::size_t>(i)] =
          run_single_sequence(config, suite, seeds[static_cast<std::size_t>(i)], keep_artifacts);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RunOutputs run;
  std::vector<SequenceResult> results;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    results.push_back(outputs[i].result);
    run.training_log += outputs[i].training_log;
    if (keep_artifacts) run.checkpoints.emplace_back(seeds[i], std::move(outputs[i].checkpoint));
  }
  run.metrics = metrics_report(config_digest(config), header_for(config), std::move(results));
  return run;
}

std::vector<losses::Ablation> ablation_grid() {
  // Same row order as the reference table.
  return {
      {false, false, false},  // full
      {true, false, false},   // -CSC
      {false, false, true},   // -CKS
      {false, true, false},   // -CED
      {false, true, true},    // -CKS,-CED
      {true, false, true},    // -CKS,-CSC
      {true, true, false},    // -CED,-CSC
      {true, true, true},     // -CED,-CKS,-CSC
  };
}

nlohmann::json reference_ablation() {
  return {
      {"full", {{"acc", 0.9022}, {"mf1", 0.8512}}},           {"-CSC", {{"acc", 0.8872}, {"mf1", 0.8007}}},
      {"-CKS", {{"acc", 0.8915}, {"mf1", 0.8232}}},           {"-CED", {{"acc", 0.8828}, {"mf1", 0.7934}}},
      {"-CKS,-CED", {{"acc", 0.8864}, {"mf1", 0.7969}}},      {"-CKS,-CSC", {{"acc", 0.8926}, {"mf1", 0.8346}}},
      {"-CED,-CSC", {{"acc", 0.8868}, {"mf1", 0.8032}}},      {"-CED,-CKS,-CSC", {{"acc", 0.8823}, {"mf1", 0.7919}}},
  };
}

nlohmann::json ablate(const RunConfig& config, const std::vector<data::TaskDataset>& suite,
                      const std::vector<losses::Ablation>& grid) {
  if (config.training.baseline != Baseline::kClassic) throw ConfigError("ablations apply to the classic baseline only");
  const nlohmann::json reference = reference_ablation();
  nlohmann::json rows = nlohmann::json::array();
  std::map<std::string, double> desk_mf1, reference_mf1;
  for (const auto& abl : grid) {
    RunConfig cell = config;
    cell.training.ablation = abl;
    const nlohmann::json metrics = run_sequence(cell, suite, false).metrics;
    const std::string label = abl.label();
    const TaskScore fin = aggregate(metrics, "final");
    nlohmann::json row = {{"ablation", label},
                          {"config_digest", metrics["config_digest"]},
                          {"forward", metrics["aggregates"]["forward"]},
                          {"final", metrics["aggregates"]["final"]}};
    desk_mf1[label] = fin.mf1;
    if (reference.contains(label)) {
      row["reference"] = reference[label];
      reference_mf1[label] = reference[label]["mf1"].get<double>();
    }
    rows.push_back(row);
  }

  // Orderings are reported, not asserted: desk-scale data cannot stand in for the reference setting.
  nlohmann::json orderings = nlohmann::json::array();
  std::size_t agree = 0, pairs = 0;
  std::vector<std::string> labels;
  for (const auto& [label, _] : reference_mf1) labels.push_back(label);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const bool ref_order = reference_mf1[labels[i]] > reference_mf1[labels[j]];
      const bool desk = desk_mf1[labels[i]] > desk_mf1[labels[j]];
      agree += ref_order == desk ? 1 : 0;
      ++pairs;
    }
  }
  if (desk_mf1.count("full") != 0) {
    for (const auto& [label, mf1] : desk_mf1) {
      if (label == "full") continue;
      orderings.push_back({{"ablation", label},
                           {"reference_full_above", true},
                           {"desk_full_above", desk_mf1["full"] > mf1},
                           {"desk_mf1_gap", desk_mf1["full"] - mf1}});
    }
  }
  nlohmann::json table = header_for(config);
  table.erase("ablation");
  table["config_digest"] = config_digest(config);
  table["rows"] = rows;
  table["full_vs_ablation"] = orderings;
  table["pairwise_order_agreement"] = pairs == 0 ? nlohmann::json(nullptr)
                                                 : nlohmann::json(static_cast<double>(agree) / static_cast<double>(pairs));
  return table;
}

nlohmann::json evaluate_checkpoint(const RunConfig& config, const model::Checkpoint& checkpoint,
                                   const std::vector<data::TaskDataset>& suite, EvalMode mode) {
  std::vector<std::string> order;
  TrainingConfig training = config.training;
  try {
    order = checkpoint.meta.at("task_order").get<std::vector<std::string>>();
    training.baseline = parse_baseline(checkpoint.meta.at("baseline").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint lacks run metadata (") + e.what() + ")");
  }
  const std::uint64_t seed = checkpoint.meta.value("seed", std::uint64_t{0});
  ContinualLearner learner(config.model, training, seed);
  for (const auto& name : order) {
    auto it = std::find_if(suite.begin(), suite.end(), [&](const auto& t) { return t.name == name; });
    if (it == suite.end()) throw DataError("checkpoint task \"" + name + "\" is not in the data source");
    data::TaskDataset test_only{it->name, {}, {}, it->test};
    learner.add_task(std::move(test_only));
  }
  learner.restore(checkpoint);
  SequenceResult result;
  result.seed = seed;
  result.order = order;
  for (int t = 1; t <= static_cast<int>(order.size()); ++t) {
    result.final[learner.task_name(t)] = learner.evaluate(t, mode);
  }
  result.forward = result.final;
  nlohmann::json header = {{"baseline", to_string(training.baseline)},
                           {"mode", to_string(mode)},
                           {"source", "checkpoint"}};
  nlohmann::json report = metrics_report(config_digest(config), header, {result});
  report.erase("forward");
  report["aggregates"].erase("forward");
  for (auto& s : report["per_sequence"]) {
    s.erase("forward");
    s.erase("mean_forward");
  }
  return report;
}

}  // namespace classic::harness
