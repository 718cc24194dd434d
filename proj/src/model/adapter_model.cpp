#include "classic/model/adapter_model.hpp"

#include <cmath>
#include <cstring>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/data/example.hpp"
#include "classic/data/tokenizer.hpp"
#include "classic/error.hpp"

namespace classic::model {

namespace {

Tensor normal_tensor(ad::Shape shape, double stddev, Rng& rng, bool trainable) {
  std::vector<double> values(ad::shape_numel(shape));
  for (double& v : values) v = rng.normal(0.0, stddev);
  return Tensor(std::move(shape), std::move(values), trainable);
}

Linear make_linear(std::size_t in, std::size_t out, double stddev, Rng& rng, bool trainable) {
  return {normal_tensor({out, in}, stddev, rng, trainable), Tensor::zeros({out}, trainable)};
}

LayerNormParams make_norm(std::size_t width, bool trainable) {
  return {Tensor::full({width}, 1.0, trainable), Tensor::zeros({width}, trainable)};
}

Tensor linear(const Tensor& x, const Linear& layer) {
  return ad::add(ad::matmul(x, layer.weight, /*trans_b=*/true), layer.bias);
}

Tensor norm(const Tensor& x, const LayerNormParams& p) { return ad::layer_norm(x, p.gamma, p.beta); }

struct ForwardContext {
  const AdapterModel& model;
  const std::vector<Tensor>& masks;
  bool training;
  Rng* rng;
  std::size_t rows;
  std::size_t length;
  std::vector<std::uint8_t> key_mask;  // [N*H, L, L]
};

Tensor apply_adapter(const Tensor& h, const Adapter& adapter, std::size_t mask_slot, ForwardContext& ctx) {
  Tensor bottleneck = ad::relu(linear(h, adapter.down));
  if (!ctx.masks.empty()) bottleneck = ad::mul(bottleneck, ctx.masks[mask_slot]);
  if (ctx.training && ctx.model.config.dropout_p > 0.0) {
    bottleneck = ad::dropout(bottleneck, 1.0 - ctx.model.config.dropout_p, *ctx.rng, true);
  }
  Tensor out = linear(bottleneck, adapter.up);
  if (!ctx.masks.empty()) out = ad::mul(out, ctx.masks[mask_slot + 1]);
  return ad::add(h, out);
}

Tensor self_attention(const Tensor& x, const EncoderLayer& layer, ForwardContext& ctx) {
  const std::size_t d = ctx.model.config.d_model;
  const std::size_t heads = ctx.model.config.n_heads;
  const std::size_t dh = d / heads;
  const std::size_t n = ctx.rows;
  const std::size_t len = ctx.length;
  auto split = [&](const Tensor& t) {
    return ad::reshape(ad::permute(ad::reshape(t, {n, len, heads, dh}), {0, 2, 1, 3}), {n * heads, len, dh});
  };
  Tensor q = split(linear(x, layer.query));
  Tensor k = split(linear(x, layer.key));
  Tensor v = split(linear(x, layer.value));
  Tensor scores = ad::scale(ad::bmm(q, k, /*trans_b=*/true), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor probs = ad::masked_softmax(scores, ctx.key_mask);
  Tensor context = ad::bmm(probs, v);
  Tensor merged = ad::reshape(ad::permute(ad::reshape(context, {n, heads, len, dh}), {0, 2, 1, 3}), {n * len, d});
  return linear(merged, layer.attn_out);
}

}  // namespace

void validate(const ModelConfig& c) {
  if (c.vocab_buckets < data::kMinVocabBuckets) throw ConfigError("model.vocab_buckets must be >= 16");
  if (c.d_model == 0) throw ConfigError("model.d_model must be positive");
  if (c.n_heads == 0 || c.d_model % c.n_heads != 0) throw ConfigError("model.d_model must be divisible by model.n_heads");
  if (c.n_layers == 0) throw ConfigError("model.n_layers must be positive");
  if (c.ffn_dim == 0) throw ConfigError("model.ffn_dim must be positive");
  if (c.bottleneck() < 2) throw ConfigError("model.adapter_dim must be >= 2");
  if (c.max_len < 4 || c.max_len > 512) throw ConfigError("model.max_len must be in [4, 512]");
  if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0)) throw ConfigError("model.dropout must be in [0, 1)");
}

std::vector<NamedParam> AdapterModel::named_parameters() const {
  std::vector<NamedParam> out;
  auto add_linear = [&](const std::string& name, const Linear& l, ParamRole role) {
    out.push_back({name + ".weight", l.weight, role});
    out.push_back({name + ".bias", l.bias, role});
  };
  auto add_norm = [&](const std::string& name, const LayerNormParams& p) {
    out.push_back({name + ".gamma", p.gamma, ParamRole::kLayerNorm});
    out.push_back({name + ".beta", p.beta, ParamRole::kLayerNorm});
  };
  out.push_back({"embedding.token", token_embedding, ParamRole::kBackbone});
  out.push_back({"embedding.position", position_embedding, ParamRole::kBackbone});
  add_norm("embedding.norm", embedding_norm);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    const EncoderLayer& l = layers[i];
    add_linear(p + "query", l.query, ParamRole::kBackbone);
    add_linear(p + "key", l.key, ParamRole::kBackbone);
    add_linear(p + "value", l.value, ParamRole::kBackbone);
    add_linear(p + "attn_out", l.attn_out, ParamRole::kBackbone);
    add_linear(p + "ffn_in", l.ffn_in, ParamRole::kBackbone);
    add_linear(p + "ffn_out", l.ffn_out, ParamRole::kBackbone);
    add_norm(p + "attn_norm", l.attn_norm);
    add_norm(p + "ffn_norm", l.ffn_norm);
    add_linear(p + "attn_adapter.down", l.attn_adapter.down, ParamRole::kAdapter);
    add_linear(p + "attn_adapter.up", l.attn_adapter.up, ParamRole::kAdapter);
    add_linear(p + "ffn_adapter.down", l.ffn_adapter.down, ParamRole::kAdapter);
    add_linear(p + "ffn_adapter.up", l.ffn_adapter.up, ParamRole::kAdapter);
  }
  add_linear("head", head, ParamRole::kHead);
  return out;
}

std::vector<NamedParam> AdapterModel::trainable_parameters() const {
  std::vector<NamedParam> out;
  for (auto& p : named_parameters()) {
    if (p.role == ParamRole::kBackbone) continue;
    if (p.role == ParamRole::kLayerNorm && !config.train_layer_norm) continue;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::size_t> AdapterModel::mask_widths() const {
  std::vector<std::size_t> widths;
  for (std::size_t i = 0; i < layers.size() * 2; ++i) {
    widths.push_back(config.bottleneck());
    widths.push_back(config.d_model);
  }
  return widths;
}

std::vector<const Linear*> AdapterModel::maskable_layers() const {
  std::vector<const Linear*> out;
  for (const EncoderLayer& l : layers) {
    out.push_back(&l.attn_adapter.down);
    out.push_back(&l.attn_adapter.up);
    out.push_back(&l.ffn_adapter.down);
    out.push_back(&l.ffn_adapter.up);
  }
  return out;
}

AdapterModel init_model(const ModelConfig& config) {
  validate(config);
  Rng rng(mix_seed(config.seed, 0x6d6f64656c));
  const std::size_t d = config.d_model;
  const std::size_t a = config.bottleneck();
  const double fan_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double fan_ffn = 1.0 / std::sqrt(static_cast<double>(config.ffn_dim));
  const bool ln = config.train_layer_norm;

  AdapterModel m;
  m.config = config;
  m.token_embedding = normal_tensor({config.vocab_buckets, d}, 1.0, rng, false);
  m.position_embedding = normal_tensor({config.max_len, d}, 0.02, rng, false);
  m.embedding_norm = make_norm(d, ln);
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    EncoderLayer l;
    l.query = make_linear(d, d, fan_d, rng, false);
    l.key = make_linear(d, d, fan_d, rng, false);
    l.value = make_linear(d, d, fan_d, rng, false);
    l.attn_out = make_linear(d, d, fan_d, rng, false);
    l.ffn_in = make_linear(d, config.ffn_dim, fan_d, rng, false);
    l.ffn_out = make_linear(config.ffn_dim, d, fan_ffn, rng, false);
    l.attn_norm = make_norm(d, ln);
    l.ffn_norm = make_norm(d, ln);
    for (Adapter* ad : {&l.attn_adapter, &l.ffn_adapter}) {
      ad->down = make_linear(d, a, fan_d, rng, true);
      ad->up = {Tensor::zeros({d, a}, true), Tensor::zeros({d}, true)};
    }
    m.layers.push_back(std::move(l));
  }
  m.head = make_linear(d, data::kNumClasses, 0.02, rng, true);
  return m;
}

void copy_backbone(AdapterModel& into, const AdapterModel& from) {
  auto dst = into.named_parameters();
  auto src = from.named_parameters();
  if (dst.size() != src.size()) throw ShapeError("copy_backbone: parameter lists differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].role != ParamRole::kBackbone) continue;
    if (dst[i].tensor.shape() != src[i].tensor.shape()) {
      throw ShapeError("copy_backbone: " + dst[i].name + " has shape " + ad::shape_str(src[i].tensor.shape()) +
                       ", expected " + ad::shape_str(dst[i].tensor.shape()));
    }
    auto s = src[i].tensor.values();
    std::copy(s.begin(), s.end(), dst[i].tensor.mutable_values().begin());
  }
}

std::uint64_t backbone_checksum(const AdapterModel& model) {
  std::string bytes;
  for (const auto& p : model.named_parameters()) {
    if (p.role != ParamRole::kBackbone) continue;
    auto v = p.tensor.values();
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  return data::fnv1a(bytes);
}

Tensor head_logits(const AdapterModel& model, const Tensor& representation) { return linear(representation, model.head); }

TaskView forward_masked(const AdapterModel& model, const data::EncodedBatch& batch, const std::vector<Tensor>& masks,
                        bool training, Rng* rng) {
  const ModelConfig& cfg = model.config;
  if (!masks.empty()) {
    const auto widths = model.mask_widths();
    if (masks.size() != widths.size()) {
      throw ShapeError("forward_masked: got " + std::to_string(masks.size()) + " masks, model has " +
                       std::to_string(widths.size()) + " maskable layers");
    }
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (masks[i].size() != widths[i]) {
        throw ShapeError("forward_masked: mask " + std::to_string(i) + " has width " + std::to_string(masks[i].size()) +
                         ", expected " + std::to_string(widths[i]));
      }
    }
  }
  if (batch.length > cfg.max_len) throw ShapeError("forward_masked: batch length exceeds max_len");
  if (training && cfg.dropout_p > 0.0 && rng == nullptr) throw Error("forward_masked: training needs a random source");

  const std::size_t n = batch.rows;
  const std::size_t len = batch.length;
  ForwardContext ctx{model, masks, training, rng, n, len, {}};
  ctx.key_mask.resize(n * cfg.n_heads * len * len);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      for (std::size_t i = 0; i < len; ++i) {
        std::uint8_t* row = ctx.key_mask.data() + ((r * cfg.n_heads + h) * len + i) * len;
        std::copy_n(batch.padding_mask.data() + r * len, len, row);
      }
    }
  }

  std::vector<std::size_t> positions(n * len);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i % len;
  Tensor x = ad::add(ad::gather_rows(model.token_embedding, batch.token_ids),
                     ad::gather_rows(model.position_embedding, positions));
  x = norm(x, model.embedding_norm);

  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const EncoderLayer& layer = model.layers[li];
    Tensor attended = apply_adapter(self_attention(x, layer, ctx), layer.attn_adapter, 4 * li, ctx);
    x = norm(ad::add(x, attended), layer.attn_norm);
    Tensor ffn = linear(ad::relu(linear(x, layer.ffn_in)), layer.ffn_out);
    ffn = apply_adapter(ffn, layer.ffn_adapter, 4 * li + 2, ctx);
    x = norm(ad::add(x, ffn), layer.ffn_norm);
  }

  std::vector<std::size_t> cls_rows(n);
  for (std::size_t r = 0; r < n; ++r) cls_rows[r] = r * len;
  TaskView view;
  view.task_id = batch.task_id;
  view.representation = ad::gather_rows(x, cls_rows);
  view.logits = head_logits(model, view.representation);
  return view;
}

std::vector<TaskView> multi_view_forward(const AdapterModel& model, const data::EncodedBatch& batch,
                                         const masks::MaskStore& store, int current_task,
                                         const std::vector<Tensor>& current_masks, const MultiViewOptions& options,
                                         Rng* rng) {
  if (current_task < 1) throw Error("multi_view_forward: task ids start at 1");
  std::vector<TaskView> views;
  for (int i = 1; i < current_task; ++i) {
    const auto& stored = store.get(i);
    TaskView view;
    {
      ad::NoGradScope no_grad;
      view = forward_masked(model, batch, stored.binary, false, nullptr);
    }
    if (options.teacher_grad) view.logits = head_logits(model, view.representation);
    view.task_id = i;
    views.push_back(std::move(view));
  }
  TaskView current = forward_masked(model, batch, current_masks, options.training, rng);
  current.task_id = current_task;
  views.push_back(std::move(current));
  return views;
}

}  // namespace classic::model
