#include "classic/harness/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <utility>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/data/batch.hpp"
#include "classic/error.hpp"

namespace classic::harness {

namespace {

constexpr std::uint64_t kLearnerSalt = 0x6c6561726e6572;
constexpr std::uint64_t kShuffleSalt = 0x73687566666c65;

const char* const kAttentionNames[] = {"w_f", "w_g", "w_v", "w_q", "gamma"};

int argmax_row(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

void clip_norm(const std::vector<ad::Tensor>& tensors, double max_norm) {
  double sq = 0.0;
  for (const auto& t : tensors) {
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (auto t : tensors) {
    for (double& g : t.grad()) g *= factor;
  }
}

std::string one_prefix(int task_id) { return "task" + std::to_string(task_id) + "/model/"; }

}  // namespace

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::kClassic:
      return "classic";
    case Baseline::kNcl:
      return "ncl";
    case Baseline::kOne:
      return "one";
  }
  return "classic";
}

std::string to_string(EvalMode m) { return m == EvalMode::kDil ? "dil" : "til"; }

Baseline parse_baseline(const std::string& name) {
  if (name == "classic") return Baseline::kClassic;
  if (name == "ncl") return Baseline::kNcl;
  if (name == "one") return Baseline::kOne;
  throw ConfigError("unknown baseline \"" + name + "\" (expected classic, ncl or one)");
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "dil") return EvalMode::kDil;
  if (name == "til") return EvalMode::kTil;
  throw ConfigError("unknown mode \"" + name + "\" (expected dil or til)");
}

void validate(const TrainingConfig& c) {
  if (c.epochs < 1) throw ConfigError("training.epochs must be at least 1");
  if (c.batch_size < 2) throw ConfigError("training.batch_size must be at least 2");
  if (!(c.learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
  if (!(c.s_max >= 1.0)) throw ConfigError("training.s_max must be at least 1");
  if (!(c.mask_threshold > 0.0 && c.mask_threshold < 1.0)) throw ConfigError("training.mask_threshold must be in (0, 1)");
  if (c.embedding_clip < 0.0) throw ConfigError("training.embedding_clip must be non-negative");
  if (c.early_stop && c.patience < 1) throw ConfigError("training.patience must be at least 1");
  if (!(c.weights.temperature > 0.0)) throw ConfigError("losses.temperature must be positive");
  if (c.weights.csc < 0.0 || c.weights.ced < 0.0 || c.weights.cks < 0.0) {
    throw ConfigError("losses weights must be non-negative");
  }
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

std::size_t Adam::add(ad::Tensor param) {
  const std::size_t n = param.size();
  slots_.push_back({std::move(param), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), {}});
  return slots_.size() - 1;
}

void Adam::set_frozen(std::size_t slot, std::vector<std::uint8_t> frozen) {
  Slot& s = slots_.at(slot);
  if (frozen.size() != s.param.size()) {
    throw ShapeError("Adam::set_frozen: " + std::to_string(frozen.size()) + " flags for " +
                     std::to_string(s.param.size()) + " values");
  }
  for (std::size_t i = 0; i < frozen.size(); ++i) {
    if (frozen[i] != 0) s.m[i] = s.v[i] = 0.0;
  }
  s.frozen = std::move(frozen);
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

void Adam::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (auto& s : slots_) {
    if (!s.param.has_grad()) continue;
    auto g = std::as_const(s.param).grad();
    auto w = s.param.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!s.frozen.empty() && s.frozen[i] != 0) continue;
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
    }
  }
}

ContinualLearner::ContinualLearner(model::ModelConfig model_config, TrainingConfig config, std::uint64_t seed)
    : model_config_(std::move(model_config)),
      config_(std::move(config)),
      seed_(seed),
      rng_(mix_seed(seed, kLearnerSalt)) {
  validate(config_);
  models_.push_back(model::init_model(model_config_));
  store_ = masks::MaskStore(models_.back().mask_widths());
  attention_ = attention::init_attention(model_config_.d_model, rng_);
}

int ContinualLearner::add_task(data::TaskDataset dataset) {
  data_.push_back({std::move(dataset.name), std::move(dataset.train), std::move(dataset.valid),
                   std::move(dataset.test)});
  return static_cast<int>(data_.size());
}

bool ContinualLearner::holds_training_data(int task_id) const { return !data_.at(task_id - 1).train.empty(); }

const std::string& ContinualLearner::task_name(int task_id) const { return data_.at(task_id - 1).name; }

const model::AdapterModel& ContinualLearner::model_for(int task_id) const {
  if (config_.baseline != Baseline::kOne) return models_.back();
  if (task_id < 1 || static_cast<std::size_t>(task_id) > models_.size()) {
    throw Error("no model for task " + std::to_string(task_id));
  }
  return models_[static_cast<std::size_t>(task_id - 1)];
}

void ContinualLearner::train_task(int task_id, std::ostream* log) {
  if (task_id != trained_ + 1) {
    throw Error("tasks train in order: expected task " + std::to_string(trained_ + 1) + ", got " +
                std::to_string(task_id));
  }
  TaskData& task = data_.at(static_cast<std::size_t>(task_id - 1));
  if (task.train.empty()) throw DataError("task " + task.name + " has no training data");
  const bool classic = config_.baseline == Baseline::kClassic;
  const losses::Ablation& abl = config_.ablation;
  if (config_.baseline == Baseline::kOne && task_id > 1) models_.push_back(model::init_model(model_config_));
  model::AdapterModel& m = models_.back();

  Adam adam(config_.learning_rate);
  masks::TaskEmbedding embedding;
  if (classic) {
    embedding = masks::make_task_embedding(task_id, m.mask_widths(), rng_);
    for (const auto& e : embedding.layers) adam.add(e);
    if (!abl.no_cks) {
      for (const auto& p : attention_.tensors()) adam.add(p);
    }
  }
  std::unordered_map<const ad::TensorNode*, std::size_t> slot_of;
  for (const auto& p : m.trainable_parameters()) slot_of[p.tensor.node().get()] = adam.add(p.tensor);

  const auto layers = m.maskable_layers();
  if (classic && !store_.empty()) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto acc = store_.accumulated()[l].values();
      const std::size_t in = layers[l]->weight.dim(1);
      std::vector<std::uint8_t> weight_frozen(layers[l]->weight.size()), bias_frozen(acc.size());
      for (std::size_t u = 0; u < acc.size(); ++u) {
        const std::uint8_t f = acc[u] > 0.5 ? 1 : 0;
        bias_frozen[u] = f;
        std::fill_n(weight_frozen.begin() + static_cast<std::ptrdiff_t>(u * in), in, f);
      }
      adam.set_frozen(slot_of.at(layers[l]->weight.node().get()), std::move(weight_frozen));
      adam.set_frozen(slot_of.at(layers[l]->bias.node().get()), std::move(bias_frozen));
    }
  }

  const data::TokenizerConfig tok = model_config_.tokenizer();
  const double tau = config_.weights.temperature;
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;
  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    const std::uint64_t shuffle = mix_seed(mix_seed(seed_ ^ kShuffleSalt, static_cast<std::uint64_t>(task_id)), epoch);
    const auto batches =
        data::batch_iter(task.train, config_.batch_size, shuffle, data::BatchMode::kTraining, tok, task_id);
    const std::size_t n_batches = batches.size();
    for (std::size_t b = 1; b <= n_batches; ++b) {
      const data::EncodedBatch& batch = batches[b - 1];
      adam.zero_grad();
      ad::TapeScope tape;
      losses::LossTerms terms;
      double s = 0.0;
      if (classic) {
        s = masks::anneal(b, n_batches, config_.s_max);
        const auto live = masks::live_masks(embedding, s);
        const auto views =
            model::multi_view_forward(m, batch, store_, task_id, live, {true, config_.teacher_grad}, &rng_);
        const ad::Tensor& h = views.back().representation;
        terms.ce = losses::ce_loss(views.back().logits, batch.labels);
        if (!abl.no_csc) terms.csc = losses::csc_loss(h, batch.labels, tau);
        if (!abl.no_ced) {
          std::vector<ad::Tensor> logits;
          for (const auto& v : views) logits.push_back(v.logits);
          terms.ced = losses::ced_loss(logits, tau, config_.teacher_grad, config_.reduction);
        }
        if (!abl.no_cks) {
          std::vector<ad::Tensor> reps;
          for (const auto& v : views) reps.push_back(v.representation);
          terms.cks = losses::cks_loss(attention::cks_view(reps, attention_), h, batch.labels, tau);
        }
      } else {
        const auto view = model::forward_masked(m, batch, {}, true, &rng_);
        terms.ce = losses::ce_loss(view.logits, batch.labels);
      }
      const losses::TotalLoss total = losses::total_loss(terms, config_.weights);
      tape.backward(total.total);

      if (classic) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
          ad::Tensor weight = layers[l]->weight, bias = layers[l]->bias;
          masks::protect_gradients(weight, bias, store_.accumulated()[l]);
        }
        if (config_.embedding_clip > 0.0) clip_norm(embedding.layers, config_.embedding_clip);
      }
      adam.step();

      if (log != nullptr) {
        nlohmann::json row = {{"task", task_id}, {"task_name", task.name}, {"epoch", epoch}, {"batch", b}};
        row.update(total.breakdown.to_json());
        row["s"] = classic ? nlohmann::json(s) : nlohmann::json(nullptr);
        *log << row.dump() << '\n';
      }
    }
    if (config_.early_stop && !task.valid.empty()) {
      const auto task_masks =
          classic ? masks::live_masks(embedding, config_.s_max) : std::vector<ad::Tensor>{};
      const double loss = validation_loss(m, task, task_masks);
      if (loss < best_valid) {
        best_valid = loss;
        stale_epochs = 0;
      } else if (++stale_epochs >= config_.patience) {
        break;
      }
    }
  }

  if (classic) store_.finalize_task(embedding, config_.s_max, config_.mask_threshold);
  std::vector<data::Example>().swap(task.train);
  trained_ = task_id;
}

double ContinualLearner::validation_loss(const model::AdapterModel& m, const TaskData& task,
                                         const std::vector<ad::Tensor>& task_masks) const {
  ad::NoGradScope no_grad;
  const auto batches = data::batch_iter(task.valid, config_.batch_size, 0, data::BatchMode::kEvaluation,
                                        model_config_.tokenizer(), 0);
  double total = 0.0;
  std::size_t rows = 0;
  for (const auto& batch : batches) {
    const auto view = model::forward_masked(m, batch, task_masks, false, nullptr);
    total += losses::ce_loss(view.logits, batch.labels).item() * static_cast<double>(batch.rows);
    rows += batch.rows;
  }
  return total / static_cast<double>(rows);
}

std::vector<ad::Tensor> ContinualLearner::eval_masks(int task_id, EvalMode mode) const {
  if (config_.baseline != Baseline::kClassic) return {};
  return store_.get(mode == EvalMode::kTil ? task_id : trained_).binary;
}

std::vector<int> ContinualLearner::predict(const std::vector<data::Example>& examples, int task_id,
                                           EvalMode mode) const {
  if (trained_ < 1) throw Error("predict: no task has been trained");
  if (task_id < 1 || task_id > trained_) {
    throw Error("predict: task " + std::to_string(task_id) + " has not been trained");
  }
  if (examples.empty()) return {};
  const model::AdapterModel& m = model_for(task_id);
  const auto task_masks = eval_masks(task_id, mode);
  ad::NoGradScope no_grad;
  const auto batches = data::batch_iter(examples, std::max<std::size_t>(config_.batch_size, 2), 0,
                                        data::BatchMode::kEvaluation, model_config_.tokenizer(), task_id);
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& batch : batches) {
    const auto view = model::forward_masked(m, batch, task_masks, false, nullptr);
    const auto logits = view.logits.values();
    for (std::size_t r = 0; r < batch.rows; ++r) out.push_back(argmax_row(logits.subspan(r * 3, 3)));
  }
  return out;
}

TaskScore ContinualLearner::evaluate(int task_id, EvalMode mode) const {
  const auto& test = data_.at(static_cast<std::size_t>(task_id - 1)).test;
  if (test.empty()) throw DataError("task " + task_name(task_id) + " has no test data");
  std::vector<int> gold;
  gold.reserve(test.size());
  for (const auto& ex : test) gold.push_back(static_cast<int>(ex.label));
  return score(predict(test, task_id, mode), gold);
}

void ContinualLearner::save(model::Checkpoint& checkpoint) const {
  checkpoint.meta["baseline"] = to_string(config_.baseline);
  checkpoint.meta["seed"] = seed_;
  checkpoint.meta["trained_tasks"] = trained_;
  std::vector<std::string> names;
  for (int t = 1; t <= trained_; ++t) names.push_back(task_name(t));
  checkpoint.meta["task_order"] = names;
  if (config_.baseline == Baseline::kOne) {
    for (std::size_t k = 0; k < models_.size(); ++k) {
      model::store_model(checkpoint, models_[k], one_prefix(static_cast<int>(k + 1)));
    }
    return;
  }
  model::store_model(checkpoint, models_.back());
  if (config_.baseline == Baseline::kClassic) {
    model::store_masks(checkpoint, store_);
    const auto tensors = attention_.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      checkpoint.put(std::string("attention/") + kAttentionNames[i], tensors[i]);
    }
  }
}

void ContinualLearner::restore(const model::Checkpoint& checkpoint) {
  try {
    trained_ = checkpoint.meta.at("trained_tasks").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint has no trained_tasks (") + e.what() + ")");
  }
  models_.clear();
  if (config_.baseline == Baseline::kOne) {
    for (int k = 1; k <= trained_; ++k) models_.push_back(model::load_model(checkpoint, one_prefix(k)));
    return;
  }
  models_.push_back(model::load_model(checkpoint));
  if (config_.baseline == Baseline::kClassic) {
    store_ = model::load_masks(checkpoint);
    auto tensors = attention_.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& src = checkpoint.get(std::string("attention/") + kAttentionNames[i]);
      if (src.shape() != tensors[i].shape()) throw CheckpointError("attention tensor shape mismatch");
      std::copy(src.values().begin(), src.values().end(), tensors[i].mutable_values().begin());
    }
  }
}

}  // namespace classic::harness
