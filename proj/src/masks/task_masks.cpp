#include "classic/masks/task_masks.hpp"

#include <algorithm>
#include <string>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/error.hpp"

namespace classic::masks {

Tensor compute_mask(const Tensor& embedding, double s) {
  if (!(s > 0.0)) throw Error("compute_mask: scale must be positive");
  return ad::sigmoid(ad::scale(embedding, s));
}

double anneal(std::size_t batch_index, std::size_t batches_per_epoch, double s_max) {
  if (batches_per_epoch < 1 || batch_index < 1 || batch_index > batches_per_epoch) {
    throw Error("anneal: batch index " + std::to_string(batch_index) + " outside 1.." +
                std::to_string(batches_per_epoch));
  }
  if (batches_per_epoch == 1 || batch_index == batches_per_epoch) return s_max;
  const double lo = 1.0 / s_max;
  return lo + (s_max - lo) * static_cast<double>(batch_index - 1) / static_cast<double>(batches_per_epoch - 1);
}

Tensor accumulate(const std::vector<Tensor>& masks, std::size_t width) {
  if (masks.empty()) return Tensor::zeros({width});
  ad::NoGradScope no_grad;
  Tensor acc = ad::max_across(masks);
  if (acc.size() != width) throw ShapeError("accumulate: masks have width " + std::to_string(acc.size()) +
                                            ", expected " + std::to_string(width));
  return acc;
}

void protect_gradients(Tensor& weight, Tensor& bias, const Tensor& accumulated) {
  if (weight.rank() != 2 || weight.dim(0) != accumulated.size() || bias.size() != accumulated.size()) {
    throw ShapeError("protect_gradients: weight " + ad::shape_str(weight.shape()) + " / bias " +
                     ad::shape_str(bias.shape()) + " vs mask " + ad::shape_str(accumulated.shape()));
  }
  const std::size_t in = weight.dim(1);
  auto m = accumulated.values();
  auto gw = weight.grad();
  auto gb = bias.grad();
  for (std::size_t u = 0; u < m.size(); ++u) {
    const double keep = 1.0 - m[u];
    for (std::size_t j = 0; j < in; ++j) gw[u * in + j] *= keep;
    gb[u] *= keep;
  }
}

TaskEmbedding make_task_embedding(int task_id, const std::vector<std::size_t>& widths, Rng& rng) {
  TaskEmbedding emb;
  emb.task_id = task_id;
  for (std::size_t w : widths) {
    std::vector<double> values(w);
    for (double& v : values) v = rng.uniform(-kEmbeddingInitRange, kEmbeddingInitRange);
    emb.layers.push_back(Tensor::vector(std::move(values), true));
  }
  return emb;
}

std::vector<Tensor> live_masks(const TaskEmbedding& embedding, double s) {
  std::vector<Tensor> out;
  out.reserve(embedding.layers.size());
  for (const Tensor& e : embedding.layers) out.push_back(compute_mask(e, s));
  return out;
}

MaskStore::MaskStore(std::vector<std::size_t> widths) : widths_(std::move(widths)) { refresh(); }

const StoredMasks& MaskStore::finalize_task(const TaskEmbedding& embedding, double s_max, double threshold) {
  if (contains(embedding.task_id)) {
    throw Error("finalize_task: task " + std::to_string(embedding.task_id) + " is already finalised");
  }
  if (embedding.layers.size() != widths_.size()) throw ShapeError("finalize_task: embedding layer count mismatch");
  ad::NoGradScope no_grad;
  StoredMasks stored;
  stored.task_id = embedding.task_id;
  for (std::size_t l = 0; l < widths_.size(); ++l) {
    if (embedding.layers[l].size() != widths_[l]) throw ShapeError("finalize_task: embedding width mismatch");
    Tensor soft = compute_mask(ad::detach(embedding.layers[l]), s_max);
    std::vector<double> bin(soft.size());
    auto sv = soft.values();
    for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = sv[i] > threshold ? 1.0 : 0.0;
    stored.soft.push_back(soft);
    stored.binary.push_back(Tensor::vector(std::move(bin)));
  }
  const int id = stored.task_id;
  tasks_.emplace(id, std::move(stored));
  refresh();
  return tasks_.at(id);
}

void MaskStore::insert(StoredMasks masks) {
  if (contains(masks.task_id)) throw Error("mask store: duplicate task " + std::to_string(masks.task_id));
  if (masks.soft.size() != widths_.size() || masks.binary.size() != widths_.size()) {
    throw ShapeError("mask store: layer count mismatch");
  }
  const int id = masks.task_id;
  tasks_.emplace(id, std::move(masks));
  refresh();
}

const StoredMasks& MaskStore::get(int task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error("no stored mask for task " + std::to_string(task_id));
  return it->second;
}

std::vector<int> MaskStore::task_ids() const {
  std::vector<int> ids;
  for (const auto& [id, _] : tasks_) ids.push_back(id);
  return ids;
}

std::vector<Tensor> MaskStore::accumulated_soft() const {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < widths_.size(); ++l) {
    std::vector<Tensor> per_task;
    for (const auto& [_, m] : tasks_) per_task.push_back(m.soft[l]);
    out.push_back(accumulate(per_task, widths_[l]));
  }
  return out;
}

void MaskStore::refresh() {
  accumulated_.clear();
  for (std::size_t l = 0; l < widths_.size(); ++l) {
    std::vector<Tensor> per_task;
    for (const auto& [_, m] : tasks_) per_task.push_back(m.binary[l]);
    accumulated_.push_back(accumulate(per_task, widths_[l]));
  }
}

double jaccard(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    auto av = a[l].values();
    auto bv = b[l].values();
    for (std::size_t i = 0; i < av.size(); ++i) {
      const bool x = av[i] > 0.5;
      const bool y = bv[i] > 0.5;
      both += (x && y) ? 1 : 0;
      either += (x || y) ? 1 : 0;
    }
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

nlohmann::json mask_report(const MaskStore& store) {
  nlohmann::json report;
  const auto ids = store.task_ids();
  report["tasks"] = ids;
  nlohmann::json layers = nlohmann::json::array();
  std::size_t total_units = 0;
  std::size_t total_free = 0;
  for (std::size_t l = 0; l < store.widths().size(); ++l) {
    auto acc = store.accumulated()[l].values();
    const auto used = static_cast<std::size_t>(std::count_if(acc.begin(), acc.end(), [](double v) { return v > 0.5; }));
    const std::size_t width = store.widths()[l];
    std::size_t shared = 0;
    for (std::size_t u = 0; u < width; ++u) {
      std::size_t owners = 0;
      for (int id : ids) owners += store.get(id).binary[l].values()[u] > 0.5 ? 1 : 0;
      shared += owners > 1 ? 1 : 0;
    }
    nlohmann::json per_task = nlohmann::json::object();
    for (int id : ids) {
      auto bv = store.get(id).binary[l].values();
      per_task[std::to_string(id)] = std::count_if(bv.begin(), bv.end(), [](double v) { return v > 0.5; });
    }
    layers.push_back({{"layer", l},
                      {"width", width},
                      {"used_fraction", width == 0 ? 0.0 : static_cast<double>(used) / static_cast<double>(width)},
                      {"used_units", used},
                      {"shared_units", shared},
                      {"free_units", width - used},
                      {"units_per_task", per_task}});
    total_units += width;
    total_free += width - used;
  }
  report["layers"] = layers;
  report["total_units"] = total_units;
  report["free_units"] = total_free;
  report["used_fraction"] =
      total_units == 0 ? 0.0 : static_cast<double>(total_units - total_free) / static_cast<double>(total_units);
  nlohmann::json overlap = nlohmann::json::array();
  for (int a : ids) {
    nlohmann::json row = nlohmann::json::array();
    for (int b : ids) row.push_back(jaccard(store.get(a).binary, store.get(b).binary));
    overlap.push_back(row);
  }
  report["jaccard"] = overlap;
  return report;
}

}  // namespace classic::masks
