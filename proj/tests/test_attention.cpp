#include <gtest/gtest.h>

#include <cmath>

#include "classic/attention/knowledge_attention.hpp"
#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/rng.hpp"
#include "oracles.hpp"

using namespace classic;
using ad::Tensor;

namespace {

Tensor random_matrix(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.uniform(-1, 1);
  return Tensor({n, d}, v);
}

}  // namespace

TEST(Attention, InitialisesGateAtZero) {
  Rng rng(1);
  const auto p = attention::init_attention(4, rng);
  EXPECT_EQ(p.gamma.item(), 0.0);
  EXPECT_TRUE(p.w_f.requires_grad());
}

TEST(Attention, ClosedGateSumsViews) {
  Rng rng(2);
  const auto p = attention::init_attention(3, rng);
  std::vector<Tensor> views{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
  const auto out = attention::cks_view(views, p);
  const auto ref = ad::add(views[0], views[1]);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.at(i), ref.at(i));
  const auto single = attention::cks_view({views[0]}, p);
  for (std::size_t i = 0; i < single.size(); ++i) EXPECT_EQ(single.at(i), views[0].at(i));
}

TEST(Attention, HandCaseWithIdentityWeights) {
  attention::AttentionParams p;
  p.w_f = p.w_g = p.w_v = p.w_q = Tensor({2, 2}, {1, 0, 0, 1});
  p.gamma = Tensor::scalar(1.0);
  Tensor h1({1, 2}, {1, 0}), h2({1, 2}, {0, 1});
  const auto out = attention::cks_view({h1, h2}, p);
  // j = 1: scores (1, 0), j = 2: scores (0, 1); each o_j mixes the views.
  const double a = std::exp(1.0) / (std::exp(1.0) + 1.0), b = 1.0 - a;
  EXPECT_NEAR(out.at(0), (a + b) + 1.0, 1e-12);
  EXPECT_NEAR(out.at(1), (b + a) + 1.0, 1e-12);
}

TEST(Attention, MatchesPerSampleOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.index(4), n = 1 + rng.index(3), t = 1 + rng.index(3);
    auto p = attention::init_attention(d, rng);
    p.gamma.mutable_values()[0] = rng.uniform(-1, 1);
    std::vector<Tensor> views;
    std::vector<oracle::Matrix> rows;
    for (std::size_t i = 0; i < t; ++i) {
      views.push_back(random_matrix(n, d, rng));
      rows.push_back(oracle::rows_of(views.back()));
    }
    const auto out = attention::cks_view(views, p);
    const auto ref = oracle::attention_view(rows, oracle::rows_of(p.w_f), oracle::rows_of(p.w_g),
                                            oracle::rows_of(p.w_v), oracle::rows_of(p.w_q), p.gamma.item());
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(out.at(s * d + c), ref[s][c], 1e-10);
    }
  }
}

TEST(Attention, WeightsAreRowStochastic) {
  Rng rng(4);
  const auto p = attention::init_attention(3, rng);
  std::vector<Tensor> views{random_matrix(2, 3, rng), random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
  const auto alpha = attention::attention_weights(views, p);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += alpha.at(r * 3 + i);
    EXPECT_NEAR(s, 1.0, 1e-10);
  }
  const auto report = attention::alpha_report(views, p);
  EXPECT_EQ(report["tasks"], 3);
}

TEST(Attention, ZeroWeightsGiveUniformAlpha) {
  attention::AttentionParams p;
  p.w_f = p.w_g = p.w_v = p.w_q = Tensor::zeros({2, 2});
  p.gamma = Tensor::scalar(5.0);
  Rng rng(5);
  std::vector<Tensor> views{random_matrix(1, 2, rng), random_matrix(1, 2, rng)};
  const auto alpha = attention::attention_weights(views, p);
  for (double a : alpha.values()) EXPECT_DOUBLE_EQ(a, 0.5);
  const auto out = attention::cks_view(views, p);
  EXPECT_NEAR(out.at(0), views[0].at(0) + views[1].at(0), 1e-15);
}
