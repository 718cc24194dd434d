#include "classic/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "classic/error.hpp"

namespace classic::model {

void Checkpoint::put(std::string name, const ad::Tensor& tensor) { tensors.emplace_back(std::move(name), tensor); }

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, _] : tensors) {
    if (n == name) return true;
  }
  return false;
}

const ad::Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw CheckpointError("checkpoint has no tensor \"" + name + "\"");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json index = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : checkpoint.tensors) {
    index.push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    offset += tensor.size();
  }
  const std::string header = nlohmann::json{{"meta", checkpoint.meta}, {"tensors", index}}.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  const std::uint64_t header_size = header.size();
  out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [_, tensor] : checkpoint.tensors) {
    auto v = tensor.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::string magic(kCheckpointMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic) {
    throw CheckpointError(path.string() + ": bad magic (expected \"" + std::string(kCheckpointMagic) + "\")");
  }
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof(header_size));
  if (!in || header_size > (std::uint64_t{1} << 32)) throw CheckpointError(path.string() + ": truncated header");
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw CheckpointError(path.string() + ": truncated header");

  Checkpoint ckpt;
  nlohmann::json index;
  try {
    nlohmann::json parsed = nlohmann::json::parse(header);
    ckpt.meta = parsed.at("meta");
    index = parsed.at("tensors");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed header (" + e.what() + ")");
  }
  std::vector<double> payload;
  {
    std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (rest.size() % sizeof(double) != 0) throw CheckpointError(path.string() + ": truncated payload");
    payload.resize(rest.size() / sizeof(double));
    std::memcpy(payload.data(), rest.data(), rest.size());
  }
  try {
    for (const auto& entry : index) {
      const auto shape = entry.at("shape").get<ad::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = ad::shape_numel(shape);
      if (offset + count > payload.size()) throw CheckpointError(path.string() + ": truncated payload");
      std::vector<double> values(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                                 payload.begin() + static_cast<std::ptrdiff_t>(offset + count));
      ckpt.put(entry.at("name").get<std::string>(), ad::Tensor(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed tensor index (" + e.what() + ")");
  }
  return ckpt;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_buckets", c.vocab_buckets}, {"d_model", c.d_model},     {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},             {"ffn_dim", c.ffn_dim},     {"adapter_dim", c.bottleneck()},
          {"max_len", c.max_len},             {"dropout", c.dropout_p},   {"train_layer_norm", c.train_layer_norm},
          {"seed", c.seed},                   {"backbone_file", c.backbone_file}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.vocab_buckets = j.at("vocab_buckets").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.adapter_dim = j.at("adapter_dim").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout_p = j.at("dropout").get<double>();
    c.train_layer_norm = j.at("train_layer_norm").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.backbone_file = j.value("backbone_file", std::string());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed model config (") + e.what() + ")");
  }
}

void store_model(Checkpoint& checkpoint, const AdapterModel& model, const std::string& prefix) {
  checkpoint.meta["model_config"] = to_json(model.config);
  for (const auto& p : model.named_parameters()) checkpoint.put(prefix + p.name, p.tensor);
}

namespace {
void copy_into(ad::Tensor& dst, const ad::Tensor& src, const std::string& name) {
  if (dst.shape() != src.shape()) {
    throw CheckpointError("tensor " + name + " has shape " + ad::shape_str(src.shape()) + ", expected " +
                          ad::shape_str(dst.shape()));
  }
  auto s = src.values();
  std::copy(s.begin(), s.end(), dst.mutable_values().begin());
}
}  // namespace

AdapterModel load_model(const Checkpoint& checkpoint, const std::string& prefix) {
  if (!checkpoint.meta.contains("model_config")) throw CheckpointError("checkpoint has no model_config");
  ModelConfig config = model_config_from_json(checkpoint.meta["model_config"]);
  config.backbone_file.clear();
  AdapterModel model = init_model(config);
  for (auto& p : model.named_parameters()) copy_into(p.tensor, checkpoint.get(prefix + p.name), p.name);
  return model;
}

void load_backbone(AdapterModel& model, const Checkpoint& checkpoint) {
  for (auto& p : model.named_parameters()) {
    if (p.role == ParamRole::kBackbone) copy_into(p.tensor, checkpoint.get("model/" + p.name), p.name);
  }
}

void store_masks(Checkpoint& checkpoint, const masks::MaskStore& store) {
  checkpoint.meta["mask_widths"] = store.widths();
  checkpoint.meta["mask_tasks"] = store.task_ids();
  for (int id : store.task_ids()) {
    const auto& m = store.get(id);
    for (std::size_t l = 0; l < m.soft.size(); ++l) {
      const std::string base = "masks/" + std::to_string(id) + "/";
      checkpoint.put(base + "soft/" + std::to_string(l), m.soft[l]);
      checkpoint.put(base + "binary/" + std::to_string(l), m.binary[l]);
    }
  }
}

masks::MaskStore load_masks(const Checkpoint& checkpoint) {
  try {
    masks::MaskStore store(checkpoint.meta.at("mask_widths").get<std::vector<std::size_t>>());
    for (int id : checkpoint.meta.at("mask_tasks").get<std::vector<int>>()) {
      masks::StoredMasks m;
      m.task_id = id;
      for (std::size_t l = 0; l < store.widths().size(); ++l) {
        const std::string base = "masks/" + std::to_string(id) + "/";
        m.soft.push_back(checkpoint.get(base + "soft/" + std::to_string(l)).clone());
        m.binary.push_back(checkpoint.get(base + "binary/" + std::to_string(l)).clone());
      }
      store.insert(std::move(m));
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed mask section (") + e.what() + ")");
  }
}

}  // namespace classic::model
