#include <gtest/gtest.h>

#include <cmath>

#include "classic/autodiff/gradcheck.hpp"
#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/rng.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/error.hpp"

using namespace classic;
using ad::Tensor;

TEST(Ops, BroadcastAddsTrailingSuffix) {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::vector({10, 20, 30});
  const auto y = ad::add(a, b);
  EXPECT_EQ(y.shape(), (ad::Shape{2, 3}));
  EXPECT_DOUBLE_EQ(y.at(4), 25.0);
}

TEST(Ops, MismatchedShapesThrow) {
  Tensor a({2, 3}, std::vector<double>(6, 1.0));
  Tensor b({2, 2}, std::vector<double>(4, 1.0));
  EXPECT_THROW(ad::add(a, b), ShapeError);
  EXPECT_THROW(ad::matmul(a, a), ShapeError);
}

TEST(Ops, MatmulValues) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  const auto c = ad::matmul(a, b);
  EXPECT_DOUBLE_EQ(c.at(0), 19.0);
  EXPECT_DOUBLE_EQ(c.at(3), 50.0);
  const auto ct = ad::matmul(a, b, true);
  EXPECT_DOUBLE_EQ(ct.at(0), 17.0);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Tensor x({2, 3}, {1, 2, 3, -1, 0, 5});
  const auto y = ad::softmax(x);
  EXPECT_NEAR(y.at(0) + y.at(1) + y.at(2), 1.0, 1e-12);
  EXPECT_NEAR(y.at(3) + y.at(4) + y.at(5), 1.0, 1e-12);
}

TEST(Ops, MaskedLogSoftmaxIgnoresMaskedEntries) {
  Tensor x({1, 3}, {1.0, 100.0, 2.0});
  const auto y = ad::masked_log_softmax(x, {1, 0, 1});
  EXPECT_NEAR(y.at(0), 1.0 - std::log(std::exp(1.0) + std::exp(2.0)), 1e-12);
  EXPECT_EQ(y.at(1), 0.0);
}

TEST(Ops, LayerNormNormalises) {
  Tensor x({1, 4}, {1, 2, 3, 4});
  const auto y = ad::layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}));
  double mean = 0, var = 0;
  for (double v : y.values()) mean += v / 4;
  for (double v : y.values()) var += (v - mean) * (v - mean) / 4;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-9);
}

TEST(Ops, DropoutIdentityCases) {
  Rng rng(3);
  Tensor x({2, 2}, {1, 2, 3, 4});
  const auto kept = ad::dropout(x, 1.0, rng, true);
  const auto eval = ad::dropout(x, 0.5, rng, false);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(kept.at(i), x.at(i));
    EXPECT_EQ(eval.at(i), x.at(i));
  }
}

TEST(Ops, L2NormalizeUnitRows) {
  Tensor x({2, 2}, {3, 4, 0, 2});
  const auto y = ad::l2_normalize(x);
  EXPECT_DOUBLE_EQ(y.at(0), 0.6);
  EXPECT_DOUBLE_EQ(y.at(3), 1.0);
}

TEST(Tape, BackwardProducesAnalyticGradient) {
  Tensor x = Tensor::vector({1.0, 2.0, 3.0}, true);
  ad::TapeScope tape;
  const auto y = ad::sum(ad::mul(x, x));
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
}

TEST(Tape, NoGradScopeRecordsNothing) {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  ad::TapeScope tape;
  {
    ad::NoGradScope off;
    const auto y = ad::sum(ad::exp(x));
    EXPECT_FALSE(y.requires_grad());
  }
}

TEST(Tape, DetachBlocksGradient) {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  ad::TapeScope tape;
  tape.backward(ad::sum(ad::mul(ad::detach(x), ad::detach(x))));
  EXPECT_FALSE(x.has_grad() && (x.grad()[0] != 0.0 || x.grad()[1] != 0.0));
}

TEST(GradCheck, DetectsCorrectGradient) {
  Rng rng(1);
  std::vector<double> v(12);
  for (double& x : v) x = rng.uniform(-1, 1);
  Tensor x({3, 4}, v, true);
  const double err = ad::finite_difference_check([](const Tensor& t) { return ad::sum(ad::sigmoid(t)); }, x);
  EXPECT_LE(err, 1e-6);
}

TEST(GradCheck, FlagsWrongGradient) {
  // detach hides half the product rule from the tape, so the tape gradient is x
  // while central differences see 2x.
  Tensor x = Tensor::vector({1.0, -2.0, 3.0}, true);
  EXPECT_GT(ad::finite_difference_check([](const Tensor& t) { return ad::sum(ad::mul(t, ad::detach(t))); }, x), 0.5);
  EXPECT_GT(ad::finite_difference_check([&] { return ad::sum(ad::mul(x, ad::detach(x))); }, {x}), 0.5);
}

TEST(GradCheck, MultiInputRestoresValues) {
  Tensor a = Tensor::vector({0.5, 1.5}, true), b = Tensor::vector({2.0, -1.0}, true);
  EXPECT_LE(ad::finite_difference_check([&] { return ad::sum(ad::mul(ad::exp(a), b)); }, {a, b}), 1e-6);
  EXPECT_EQ(a.at(1), 1.5);
  EXPECT_EQ(b.at(0), 2.0);
}
