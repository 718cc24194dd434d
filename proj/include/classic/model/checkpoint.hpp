#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "classic/autodiff/tensor.hpp"
#include "classic/masks/task_masks.hpp"
#include "classic/model/adapter_model.hpp"

namespace classic::model {

// File layout (little-endian):
//   "CLASSIC-CKPT-1"              14-byte magic
//   u64 header_size
//   header_size bytes of JSON     {"meta": {...}, "tensors": [{"name","shape","offset"}...]}
//   raw float64 payload           tensors back to back, offsets in values
inline constexpr std::string_view kCheckpointMagic = "CLASSIC-CKPT-1";

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, ad::Tensor>> tensors;

  void put(std::string name, const ad::Tensor& tensor);
  bool has(const std::string& name) const;
  /// Throws CheckpointError when absent.
  const ad::Tensor& get(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws CheckpointError on a bad magic string, truncation or malformed header.
Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Model config under meta["model_config"], parameters as "<prefix><name>".
void store_model(Checkpoint& checkpoint, const AdapterModel& model, const std::string& prefix = "model/");
AdapterModel load_model(const Checkpoint& checkpoint, const std::string& prefix = "model/");
/// Copies only the backbone tensors of a checkpoint into `model`.
void load_backbone(AdapterModel& model, const Checkpoint& checkpoint);

/// Stored masks as "masks/<task>/{soft,binary}/<layer>", ids under meta["mask_tasks"].
void store_masks(Checkpoint& checkpoint, const masks::MaskStore& store);
masks::MaskStore load_masks(const Checkpoint& checkpoint);

}  // namespace classic::model
