#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "classic/autodiff/rng.hpp"
#include "classic/kernels/kernels.hpp"

using namespace classic;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-3, 3);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Kernels, GemmSerialAndParallelBitIdentical) {
  Rng rng(5);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      kernels::GemmShape s{67, 45, 83, ta, tb};
      const std::size_t batch = 3;
      const auto a = random_values(batch * s.m * s.k, rng), b = random_values(batch * s.k * s.n, rng);
      std::vector<double> c1(batch * s.m * s.n, 0.5), c2 = c1;
      kernels::serial::gemm(s, batch, a.data(), b.data(), c1.data(), true);
      kernels::parallel::gemm(s, batch, a.data(), b.data(), c2.data(), true);
      EXPECT_TRUE(bit_equal(c1, c2));
    }
  }
}

TEST(Kernels, GemmMatchesNaiveLoop) {
  Rng rng(6);
  kernels::GemmShape s{4, 5, 6, false, false};
  const auto a = random_values(24, rng), b = random_values(30, rng);
  std::vector<double> c(20);
  kernels::gemm(s, 1, a.data(), b.data(), c.data(), false);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double ref = 0;
      for (std::size_t k = 0; k < 6; ++k) ref += a[i * 6 + k] * b[k * 5 + j];
      EXPECT_NEAR(c[i * 5 + j], ref, 1e-12);
    }
  }
}

TEST(Kernels, SoftmaxSerialAndParallelBitIdentical) {
  Rng rng(7);
  const std::size_t rows = 300, cols = 17;
  const auto x = random_values(rows * cols, rng);
  std::vector<std::uint8_t> mask(rows * cols);
  for (auto& m : mask) m = rng.bernoulli(0.7) ? 1 : 0;
  for (std::size_t r = 0; r < rows; ++r) mask[r * cols] = 1;
  for (bool log_space : {false, true}) {
    std::vector<double> y1(rows * cols), y2(rows * cols);
    kernels::serial::softmax_rows(rows, cols, x.data(), mask.data(), y1.data(), log_space);
    kernels::parallel::softmax_rows(rows, cols, x.data(), mask.data(), y2.data(), log_space);
    EXPECT_TRUE(bit_equal(y1, y2));
  }
}

TEST(Kernels, LayerNormSerialAndParallelBitIdentical) {
  Rng rng(8);
  const std::size_t rows = 257, cols = 32;
  const auto x = random_values(rows * cols, rng), g = random_values(cols, rng), b = random_values(cols, rng);
  const auto dy = random_values(rows * cols, rng);
  std::vector<double> y1(rows * cols), y2(rows * cols), m1(rows), m2(rows), r1(rows), r2(rows);
  kernels::serial::layer_norm_rows(rows, cols, x.data(), g.data(), b.data(), 1e-12, y1.data(), {m1.data(), r1.data()});
  kernels::parallel::layer_norm_rows(rows, cols, x.data(), g.data(), b.data(), 1e-12, y2.data(), {m2.data(), r2.data()});
  EXPECT_TRUE(bit_equal(y1, y2));
  std::vector<double> dx1(rows * cols), dx2(rows * cols), dg1(cols, 0), dg2(cols, 0), db1(cols, 0), db2(cols, 0);
  kernels::serial::layer_norm_backward_rows(rows, cols, x.data(), g.data(), dy.data(), {m1.data(), r1.data()},
                                            dx1.data(), dg1.data(), db1.data());
  kernels::parallel::layer_norm_backward_rows(rows, cols, x.data(), g.data(), dy.data(), {m2.data(), r2.data()},
                                              dx2.data(), dg2.data(), db2.data());
  EXPECT_TRUE(bit_equal(dx1, dx2));
  EXPECT_TRUE(bit_equal(dg1, dg2));
  EXPECT_TRUE(bit_equal(db1, db2));
}
