#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "classic/autodiff/rng.hpp"
#include "classic/autodiff/tensor.hpp"
#include "classic/data/batch.hpp"
#include "classic/masks/task_masks.hpp"

namespace classic::model {

using ad::Tensor;

struct ModelConfig {
  std::size_t vocab_buckets = 1024;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 64;
  std::size_t adapter_dim = 0;  // 0 selects 2 * d_model
  std::size_t max_len = 32;
  double dropout_p = 0.5;
  bool train_layer_norm = true;
  std::uint64_t seed = 0;
  /// Checkpoint whose backbone tensors replace the random initialisation.
  std::string backbone_file;

  std::size_t bottleneck() const { return adapter_dim == 0 ? 2 * d_model : adapter_dim; }
  data::TokenizerConfig tokenizer() const { return {vocab_buckets, max_len}; }
};

/// Throws ConfigError naming the offending field.
void validate(const ModelConfig& config);

/// Weight stored [out, in]; y = x W^T + b.
struct Linear {
  Tensor weight;
  Tensor bias;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

/// Bottleneck adapter with skip connection:
///   h + m_up * up(m_down * relu(down(h)))
struct Adapter {
  Linear down;  // [bottleneck, d_model]
  Linear up;    // [d_model, bottleneck]
};

struct EncoderLayer {
  Linear query, key, value, attn_out;
  Linear ffn_in, ffn_out;
  LayerNormParams attn_norm, ffn_norm;
  Adapter attn_adapter, ffn_adapter;
};

enum class ParamRole { kBackbone, kAdapter, kLayerNorm, kHead };

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamRole role;
};

/// Frozen random encoder with two adapters per layer and a shared 3-way head.
struct AdapterModel {
  ModelConfig config;
  Tensor token_embedding;     // [vocab, d]
  Tensor position_embedding;  // [max_len, d]
  LayerNormParams embedding_norm;
  std::vector<EncoderLayer> layers;
  Linear head;  // [3, d]

  /// Every parameter in a fixed order with stable names.
  std::vector<NamedParam> named_parameters() const;
  /// Parameters the optimiser may update (adapters, head, and layer norms
  /// when config.train_layer_norm).
  std::vector<NamedParam> trainable_parameters() const;

  /// Widths of the maskable adapter layers, in mask order: for each encoder
  /// layer, attention adapter (down, up) then feed-forward adapter (down, up).
  std::vector<std::size_t> mask_widths() const;
  /// The Linear producing each maskable layer, same order as mask_widths().
  std::vector<const Linear*> maskable_layers() const;
};

AdapterModel init_model(const ModelConfig& config);

/// Replaces the backbone tensors with those of another model (same shapes).
void copy_backbone(AdapterModel& into, const AdapterModel& from);

/// FNV-1a over the backbone parameter bytes.
std::uint64_t backbone_checksum(const AdapterModel& model);

/// Output of one masked forward pass.
struct TaskView {
  int task_id = 0;
  Tensor representation;  // [N, d] at [CLS] after the last layer
  Tensor logits;          // [N, 3]
};

/// Forward pass with adapter activations multiplied by `masks` (one per
/// maskable layer, widths per mask_widths()). An empty mask list runs the
/// unmasked model. Dropout is active only when `training`; `rng` may be null
/// when not training.
TaskView forward_masked(const AdapterModel& model, const data::EncodedBatch& batch, const std::vector<Tensor>& masks,
                        bool training, Rng* rng);

/// The shared classification head.
Tensor head_logits(const AdapterModel& model, const Tensor& representation);

struct MultiViewOptions {
  bool training = true;
  /// Teacher logits keep a path into the shared head.
  bool teacher_grad = false;
};

/// One view per task 1..t: tasks i < t use their stored binary masks (no
/// gradient into the encoder, evaluation mode), task t uses `current_masks`.
/// Throws Error if a stored mask is missing.
std::vector<TaskView> multi_view_forward(const AdapterModel& model, const data::EncodedBatch& batch,
                                         const masks::MaskStore& store, int current_task,
                                         const std::vector<Tensor>& current_masks, const MultiViewOptions& options,
                                         Rng* rng);

}  // namespace classic::model
