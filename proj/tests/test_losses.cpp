#include <gtest/gtest.h>

#include <cmath>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/rng.hpp"
#include "classic/error.hpp"
#include "classic/losses/losses.hpp"
#include "oracles.hpp"

using namespace classic;
using ad::Tensor;

namespace {

Tensor random_matrix(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.uniform(-2, 2);
  return Tensor({n, d}, v);
}

std::vector<int> random_labels(std::size_t n, Rng& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.index(3));
  return y;
}

}  // namespace

TEST(CeLoss, HandValues) {
  EXPECT_NEAR(losses::ce_loss(Tensor({1, 3}, {0, 0, 0}), {2}).item(), std::log(3.0), 1e-12);
  EXPECT_NEAR(losses::ce_loss(Tensor({1, 3}, {1, 0, 0}), {0}).item(), -std::log(std::exp(1.0) / (std::exp(1.0) + 2)),
              1e-12);
  EXPECT_LT(losses::ce_loss(Tensor({1, 3}, {20, 0, 0}), {0}).item(), 1e-8);
  EXPECT_THROW(losses::ce_loss(Tensor({1, 3}, {0, 0, 0}), {3}), Error);
}

TEST(CscLoss, HandCase) {
  Tensor h({3, 2}, {1, 0, 1, 0, 0, 1});
  EXPECT_NEAR(losses::csc_loss(h, {0, 0, 1}, 1.0).item(), 2 * std::log(1 + 1 / std::exp(1.0)), 1e-12);
  EXPECT_NEAR(losses::cks_loss(h, h, {0, 0, 1}, 1.0).item(), 0.6265, 1e-4);
}

TEST(CscLoss, TrivialCasesAreZero) {
  Tensor same({2, 2}, {0.6, 0.8, 0.6, 0.8});
  EXPECT_NEAR(losses::csc_loss(same, {1, 1}, 1.0).item(), 0.0, 1e-15);
  Rng rng(1);
  EXPECT_EQ(losses::csc_loss(random_matrix(2, 3, rng), {0, 1}, 1.0).item(), 0.0);
  EXPECT_THROW(losses::csc_loss(Tensor({1, 2}, {1, 0}), {0}, 1.0), Error);
}

TEST(CksLoss, AllDistinctLabelsGiveZero) {
  Rng rng(2);
  EXPECT_EQ(losses::cks_loss(random_matrix(3, 4, rng), random_matrix(3, 4, rng), {0, 1, 2}, 1.0).item(), 0.0);
}

TEST(CedLoss, IdenticalLogits) {
  Tensor z({2, 3}, {0.3, -0.2, 0.9, 0.3, -0.2, 0.9});
  EXPECT_NEAR(losses::ced_pair_loss(z, z, 1.0).item(), 4 * std::log(3.0), 1e-9);
  EXPECT_NEAR(losses::ced_loss({z, z, z}, 1.0, false).item(), 8 * std::log(3.0), 1e-9);
  EXPECT_EQ(losses::ced_loss({z}, 1.0, false).item(), 0.0);
}

TEST(CedLoss, SingleRowIsZeroAndMismatchThrows) {
  Tensor a({1, 3}, {1, 2, 3}), b({1, 3}, {0, 1, 0});
  EXPECT_NEAR(losses::ced_pair_loss(a, b, 1.0).item(), 0.0, 1e-15);
  EXPECT_THROW(losses::ced_pair_loss(a, Tensor({2, 3}, std::vector<double>(6, 0.0)), 1.0), Error);
}

TEST(CedLoss, MeanReductionDividesByAnchorCount) {
  Rng rng(4);
  const auto t = random_matrix(3, 3, rng), s = random_matrix(3, 3, rng);
  const double sum = losses::ced_pair_loss(t, s, 1.0, losses::Reduction::kSum).item();
  EXPECT_NEAR(losses::ced_pair_loss(t, s, 1.0, losses::Reduction::kMean).item(), sum / 6.0, 1e-12);
}

TEST(CedLoss, TwoViewsEqualsPairLoss) {
  Rng rng(9);
  const auto t = random_matrix(4, 3, rng), s = random_matrix(4, 3, rng);
  EXPECT_EQ(losses::ced_loss({t, s}, 0.5, false).item(), losses::ced_pair_loss(t, s, 0.5).item());
}

TEST(Losses, MatchBruteForceOracles) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(3), d = 1 + rng.index(5);
    const double tau = rng.uniform(0.2, 2.0);
    const auto y = random_labels(n, rng);
    const auto a = random_matrix(n, d, rng), b = random_matrix(n, d, rng);
    const auto zt = random_matrix(n, 3, rng), zs = random_matrix(n, 3, rng);
    EXPECT_NEAR(losses::csc_loss(a, y, tau).item(), oracle::csc(oracle::rows_of(a), y, tau), 1e-10);
    EXPECT_NEAR(losses::cks_loss(a, b, y, tau).item(),
                oracle::cks(oracle::rows_of(a), oracle::rows_of(b), y, tau), 1e-10);
    EXPECT_NEAR(losses::ced_pair_loss(zt, zs, tau).item(),
                oracle::ced_pair(oracle::rows_of(zt), oracle::rows_of(zs), tau), 1e-10);
    EXPECT_NEAR(losses::ce_loss(zs, y).item(), oracle::ce(oracle::rows_of(zs), y), 1e-12);
  }
}

TEST(Losses, PermutationInvariant) {
  Rng rng(12);
  const auto h = random_matrix(4, 3, rng), z = random_matrix(4, 3, rng);
  const std::vector<int> y{0, 1, 0, 1};
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const auto hp = ad::gather_rows(h, perm), zp = ad::gather_rows(z, perm);
  std::vector<int> yp;
  for (auto i : perm) yp.push_back(y[i]);
  EXPECT_NEAR(losses::csc_loss(h, y, 1.0).item(), losses::csc_loss(hp, yp, 1.0).item(), 1e-10);
  EXPECT_NEAR(losses::ced_pair_loss(h, z, 1.0).item(), losses::ced_pair_loss(hp, zp, 1.0).item(), 1e-10);
}

TEST(TotalLoss, WeightsAndAblation) {
  losses::LossTerms terms{Tensor::scalar(1), Tensor::scalar(2), Tensor::scalar(3), Tensor::scalar(4)};
  EXPECT_EQ(losses::total_loss(terms, {1, 1, 1, 1}).total.item(), 10.0);
  EXPECT_EQ(losses::total_loss(terms, {0, 0, 0, 1}).total.item(), 1.0);
  losses::LossTerms no_ced{Tensor::scalar(1), Tensor::scalar(2), std::nullopt, Tensor::scalar(4)};
  const auto r = losses::total_loss(no_ced, {1, 1, 1, 1});
  EXPECT_EQ(r.total.item(), 7.0);
  EXPECT_TRUE(r.breakdown.to_json()["ced"].is_null());
  losses::LossTerms bad{Tensor::scalar(1), Tensor::scalar(std::nan("")), std::nullopt, std::nullopt};
  EXPECT_THROW(losses::total_loss(bad, {1, 1, 1, 1}), NumericError);
}

TEST(Ablation, Labels) {
  EXPECT_EQ(losses::Ablation{}.label(), "full");
  EXPECT_EQ((losses::Ablation{true, true, true}.label()), "-CED,-CKS,-CSC");
  EXPECT_EQ((losses::Ablation{false, true, false}.label()), "-CED");
}
