#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include <json.hpp>

#include "classic/autodiff/rng.hpp"
#include "classic/autodiff/tensor.hpp"

namespace classic::masks {

using ad::Tensor;

inline constexpr double kDefaultSMax = 400.0;
inline constexpr double kDefaultThreshold = 0.5;
inline constexpr double kEmbeddingInitRange = 0.05;

/// sigma(s * e), recorded on the tape when e requires gradient.
Tensor compute_mask(const Tensor& embedding, double s);

/// Gate scale for batch b (1-based) of B within an epoch:
/// 1/s_max + (s_max - 1/s_max) (b - 1) / (B - 1); s_max when B == 1.
double anneal(std::size_t batch_index, std::size_t batches_per_epoch, double s_max);

/// Elementwise max over same-width masks; zeros of `width` when empty.
Tensor accumulate(const std::vector<Tensor>& masks, std::size_t width);

/// Scales gradient rows of a [units, in] weight (and the [units] bias) by
/// (1 - accumulated[unit]). Throws ShapeError on width mismatch.
void protect_gradients(Tensor& weight, Tensor& bias, const Tensor& accumulated);

/// Trainable per-layer gate embeddings of one task.
struct TaskEmbedding {
  int task_id = 0;
  std::vector<Tensor> layers;
};

/// Uniform in [-kEmbeddingInitRange, kEmbeddingInitRange], one vector per width.
TaskEmbedding make_task_embedding(int task_id, const std::vector<std::size_t>& widths, Rng& rng);

/// Live masks sigma(s e_l) for every layer.
std::vector<Tensor> live_masks(const TaskEmbedding& embedding, double s);

struct StoredMasks {
  int task_id = 0;
  std::vector<Tensor> soft;    // sigma(s_max e), kept for reporting
  std::vector<Tensor> binary;  // 1[sigma(s_max e) > threshold]; used at test time and for protection
};

/// Finalised masks of every learned task plus their accumulation.
class MaskStore {
 public:
  MaskStore() = default;
  explicit MaskStore(std::vector<std::size_t> widths);

  /// Stores the task's test-time masks and refreshes the accumulation.
  /// Throws Error if the task is already finalised.
  const StoredMasks& finalize_task(const TaskEmbedding& embedding, double s_max, double threshold = kDefaultThreshold);
  /// Restores a previously finalised task (checkpoint loading).
  void insert(StoredMasks masks);

  bool contains(int task_id) const { return tasks_.count(task_id) != 0; }
  /// Throws Error when the task has no stored masks.
  const StoredMasks& get(int task_id) const;
  std::vector<int> task_ids() const;
  std::size_t task_count() const { return tasks_.size(); }
  bool empty() const { return tasks_.empty(); }

  const std::vector<std::size_t>& widths() const { return widths_; }
  /// Elementwise max of the stored binary masks, per layer.
  const std::vector<Tensor>& accumulated() const { return accumulated_; }
  /// Same over the soft masks.
  std::vector<Tensor> accumulated_soft() const;

 private:
  void refresh();

  std::vector<std::size_t> widths_;
  std::map<int, StoredMasks> tasks_;
  std::vector<Tensor> accumulated_;
};

/// Capacity and overlap statistics of the stored binary masks:
/// per-layer used fraction and free units, pairwise Jaccard between tasks.
nlohmann::json mask_report(const MaskStore& store);

/// Jaccard index of two binary masks; two empty masks count as identical.
double jaccard(const std::vector<Tensor>& a, const std::vector<Tensor>& b);

}  // namespace classic::masks
