#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "classic/attention/knowledge_attention.hpp"
#include "classic/autodiff/rng.hpp"
#include "classic/data/example.hpp"
#include "classic/harness/metrics.hpp"
#include "classic/losses/losses.hpp"
#include "classic/masks/task_masks.hpp"
#include "classic/model/adapter_model.hpp"
#include "classic/model/checkpoint.hpp"

namespace classic::harness {

enum class Baseline {
  kClassic,  // masks, protection and contrastive losses
  kNcl,      // one model trained in sequence with CE only
  kOne,      // a fresh model per task with CE only
};
enum class EvalMode { kDil, kTil };

std::string to_string(Baseline b);
std::string to_string(EvalMode m);
/// Throw ConfigError on unknown names.
Baseline parse_baseline(const std::string& name);
EvalMode parse_eval_mode(const std::string& name);

struct TrainingConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double s_max = masks::kDefaultSMax;
  double mask_threshold = masks::kDefaultThreshold;
  /// Max l2 norm of the task-embedding gradient; 0 disables clipping.
  double embedding_clip = 0.0;
  bool teacher_grad = false;
  /// Stop a task early when validation CE has not improved for `patience` epochs.
  bool early_stop = false;
  std::size_t patience = 5;
  losses::LossWeights weights;
  losses::Ablation ablation;
  losses::Reduction reduction = losses::Reduction::kSum;
  Baseline baseline = Baseline::kClassic;
};

/// Throws ConfigError naming the offending field.
void validate(const TrainingConfig& config);

/// Adam with per-element freezing: frozen elements are never updated and
/// their moments are reset when they become frozen.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  /// Registers a parameter; returns its slot.
  std::size_t add(ad::Tensor param);
  /// Marks elements (flat indices where frozen != 0) as frozen.
  void set_frozen(std::size_t slot, std::vector<std::uint8_t> frozen);
  void zero_grad();
  void step();
  std::size_t steps() const { return steps_; }

 private:
  struct Slot {
    ad::Tensor param;
    std::vector<double> m, v;
    std::vector<std::uint8_t> frozen;  // empty: nothing frozen
  };
  double lr_, beta1_, beta2_, eps_;
  std::size_t steps_ = 0;
  std::vector<Slot> slots_;
};

/// Runs one task sequence: trains tasks one at a time and evaluates on the
/// registered test splits. Task ids are 1-based positions in the sequence.
class ContinualLearner {
 public:
  ContinualLearner(model::ModelConfig model_config, TrainingConfig config, std::uint64_t seed);

  /// Registers the next task's data and returns its id.
  int add_task(data::TaskDataset dataset);
  /// Trains the task and releases its training split. One JSON line per
  /// step goes to `log` when given.
  void train_task(int task_id, std::ostream* log = nullptr);
  /// False once the task's training split has been released.
  bool holds_training_data(int task_id) const;
  std::size_t task_count() const { return data_.size(); }
  int trained_tasks() const { return trained_; }
  const std::string& task_name(int task_id) const;

  /// Class predictions for `examples`. DIL uses the last trained task's mask
  /// (its model for `one`), TIL the mask of `task_id`.
  std::vector<int> predict(const std::vector<data::Example>& examples, int task_id, EvalMode mode) const;
  /// Scores the registered test split of `task_id`.
  TaskScore evaluate(int task_id, EvalMode mode) const;

  const model::AdapterModel& model() const { return models_.back(); }
  const model::AdapterModel& model_for(int task_id) const;
  const masks::MaskStore& mask_store() const { return store_; }
  const attention::AttentionParams& attention() const { return attention_; }
  const TrainingConfig& config() const { return config_; }

  /// Model(s), masks and attention parameters; restore() reverses it.
  void save(model::Checkpoint& checkpoint) const;
  void restore(const model::Checkpoint& checkpoint);

 private:
  struct TaskData {
    std::string name;
    std::vector<data::Example> train, valid, test;
  };

  double validation_loss(const model::AdapterModel& m, const TaskData& task,
                         const std::vector<ad::Tensor>& task_masks) const;
  std::vector<ad::Tensor> eval_masks(int task_id, EvalMode mode) const;

  model::ModelConfig model_config_;
  TrainingConfig config_;
  std::uint64_t seed_;
  Rng rng_;
  std::vector<model::AdapterModel> models_;  // one per task for `one`, else one
  masks::MaskStore store_;
  attention::AttentionParams attention_;
  std::vector<TaskData> data_;
  int trained_ = 0;
};

}  // namespace classic::harness
