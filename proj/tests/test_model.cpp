#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/data/synthetic.hpp"
#include "classic/error.hpp"
#include "classic/losses/losses.hpp"
#include "classic/model/adapter_model.hpp"
#include "classic/model/checkpoint.hpp"

using namespace classic;
using ad::Tensor;

namespace {

model::ModelConfig tiny() {
  model::ModelConfig c;
  c.vocab_buckets = 64;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ffn_dim = 16;
  c.max_len = 12;
  c.seed = 3;
  return c;
}

data::EncodedBatch probe_batch(const model::ModelConfig& c) {
  data::SyntheticSpec spec;
  spec.n_tasks = 2;
  return data::encode(data::generate_synthetic_suite(spec)[0].test, c.tokenizer(), 1);
}

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.at(i) != b.at(i)) return false;
  }
  return true;
}

}  // namespace

TEST(Model, FreshAdaptersAreIdentityAndAllOnesMasksAreNeutral) {
  const auto c = tiny();
  const auto m = model::init_model(c);
  const auto batch = probe_batch(c);
  const auto plain = model::forward_masked(m, batch, {}, false, nullptr);
  std::vector<Tensor> ones;
  for (std::size_t w : m.mask_widths()) ones.push_back(Tensor::full({w}, 1.0));
  const auto masked = model::forward_masked(m, batch, ones, false, nullptr);
  EXPECT_TRUE(same_values(plain.logits, masked.logits));
  EXPECT_EQ(plain.logits.dim(1), 3u);
  for (const auto& layer : m.layers) {
    for (double v : layer.attn_adapter.up.weight.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Model, TrainableSetExcludesBackbone) {
  auto c = tiny();
  const auto m = model::init_model(c);
  for (const auto& p : m.trainable_parameters()) EXPECT_NE(p.role, model::ParamRole::kBackbone);
  c.train_layer_norm = false;
  for (const auto& p : model::init_model(c).trainable_parameters()) EXPECT_NE(p.role, model::ParamRole::kLayerNorm);
}

TEST(Model, SeedDeterminesBackbone) {
  const auto c = tiny();
  EXPECT_EQ(model::backbone_checksum(model::init_model(c)), model::backbone_checksum(model::init_model(c)));
  auto other = c;
  other.seed = 4;
  EXPECT_NE(model::backbone_checksum(model::init_model(c)), model::backbone_checksum(model::init_model(other)));
}

TEST(Model, RejectsBadConfig) {
  auto c = tiny();
  c.n_heads = 3;
  EXPECT_THROW(model::init_model(c), ConfigError);
}

TEST(Checkpoint, RoundTripAndMagic) {
  const auto c = tiny();
  const auto m = model::init_model(c);
  model::Checkpoint ckpt;
  model::store_model(ckpt, m);
  ckpt.meta["note"] = "x";
  const auto path = std::filesystem::temp_directory_path() / "classic_rt.ckpt";
  model::write_checkpoint(path, ckpt);
  {
    std::ifstream f(path, std::ios::binary);
    std::string magic(14, '\0');
    f.read(magic.data(), 14);
    EXPECT_EQ(magic, "CLASSIC-CKPT-1");
  }
  const auto back = model::load_model(model::read_checkpoint(path));
  const auto batch = probe_batch(c);
  EXPECT_TRUE(same_values(model::forward_masked(m, batch, {}, false, nullptr).logits,
                          model::forward_masked(back, batch, {}, false, nullptr).logits));
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOT-A-CHECKPOINT";
  }
  EXPECT_THROW(model::read_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
}

TEST(Model, MultiViewTeachersCarryNoEncoderGradient) {
  const auto c = tiny();
  const auto m = model::init_model(c);
  masks::MaskStore store(m.mask_widths());
  Rng rng(1);
  const auto e1 = masks::make_task_embedding(1, m.mask_widths(), rng);
  store.finalize_task(e1, 400);
  const auto e2 = masks::make_task_embedding(2, m.mask_widths(), rng);
  const auto batch = probe_batch(c);
  ad::TapeScope tape;
  const auto views = model::multi_view_forward(m, batch, store, 2, masks::live_masks(e2, 1.0), {true, false}, &rng);
  ASSERT_EQ(views.size(), 2u);
  EXPECT_FALSE(views[0].representation.requires_grad());
  EXPECT_TRUE(views[1].representation.requires_grad());
  EXPECT_THROW(model::multi_view_forward(m, batch, store, 3, masks::live_masks(e2, 1.0), {}, &rng), Error);
}
