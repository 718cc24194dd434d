#include <gtest/gtest.h>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/error.hpp"
#include "classic/masks/task_masks.hpp"

using namespace classic;
using ad::Tensor;

TEST(Anneal, EndpointsAndMonotone) {
  EXPECT_EQ(masks::anneal(1, 10, 400), 0.0025);
  EXPECT_EQ(masks::anneal(10, 10, 400), 400.0);
  EXPECT_EQ(masks::anneal(1, 1, 400), 400.0);
  double prev = 0;
  for (std::size_t b = 1; b <= 37; ++b) {
    const double s = masks::anneal(b, 37, 400);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(Masks, SigmoidGate) {
  const auto m = masks::compute_mask(Tensor::vector({0.0, 1.0, -1.0}), 400);
  EXPECT_EQ(m.at(0), 0.5);
  EXPECT_GT(m.at(1), 1 - 1e-12);
  EXPECT_LT(m.at(2), 1e-12);
}

TEST(Masks, AccumulateIsElementwiseMax) {
  const auto acc = masks::accumulate({Tensor::vector({1, 0, 0}), Tensor::vector({0, 0, 1})}, 3);
  EXPECT_EQ(acc.at(0), 1.0);
  EXPECT_EQ(acc.at(1), 0.0);
  EXPECT_EQ(acc.at(2), 1.0);
  const auto empty = masks::accumulate({}, 3);
  for (double v : empty.values()) EXPECT_EQ(v, 0.0);
}

TEST(Masks, ProtectionZeroesProtectedRows) {
  Tensor w({2, 2}, {1, 2, 3, 4}, true), b = Tensor::vector({1, 1}, true);
  ad::TapeScope tape;
  tape.backward(ad::add(ad::sum(ad::mul(w, w)), ad::sum(ad::mul(b, b))));
  masks::protect_gradients(w, b, Tensor::vector({1, 0}));
  EXPECT_EQ(w.grad()[0], 0.0);
  EXPECT_EQ(w.grad()[1], 0.0);
  EXPECT_EQ(w.grad()[2], 6.0);
  EXPECT_EQ(b.grad()[0], 0.0);
  EXPECT_EQ(b.grad()[1], 2.0);
  EXPECT_THROW(masks::protect_gradients(w, b, Tensor::vector({1, 0, 0})), ShapeError);
}

TEST(MaskStore, FinalizeAndReport) {
  masks::MaskStore store({3});
  masks::TaskEmbedding e1{1, {Tensor::vector({0.1, -0.1, 0.2})}};
  masks::TaskEmbedding e2{2, {Tensor::vector({-0.1, -0.1, 0.3})}};
  store.finalize_task(e1, 400);
  store.finalize_task(e2, 400);
  EXPECT_THROW(store.finalize_task(e1, 400), Error);
  EXPECT_EQ(store.accumulated()[0].at(0), 1.0);
  EXPECT_EQ(store.accumulated()[0].at(1), 0.0);
  EXPECT_NEAR(masks::jaccard(store.get(1).binary, store.get(2).binary), 0.5, 1e-12);
  const auto report = masks::mask_report(store);
  EXPECT_TRUE(report.is_object());
  EXPECT_THROW(store.get(3), Error);
}

TEST(MaskStore, EmptyMasksAreIdentical) {
  EXPECT_EQ(masks::jaccard({Tensor::zeros({3})}, {Tensor::zeros({3})}), 1.0);
}
