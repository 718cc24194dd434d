#include <omp.h>

#include "rows.hpp"

namespace classic::kernels {

namespace parallel {

void gemm(const GemmShape& s, std::size_t batch, const double* a, const double* b, double* c,
          bool accumulate) {
  std::vector<double> transposed;
  const double* b_rows = b;
  if (s.trans_b) {
    transposed.resize(batch * s.k * s.n);
    std::vector<double> scratch;
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const double* src = detail::gemm_b_rowmajor(s, b + bi * s.k * s.n, scratch);
      std::copy(src, src + s.k * s.n, transposed.begin() + static_cast<std::ptrdiff_t>(bi * s.k * s.n));
    }
    b_rows = transposed.data();
  }
  GemmShape plain = s;
  plain.trans_b = false;
  const auto total = static_cast<std::ptrdiff_t>(batch * s.m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const std::size_t bi = static_cast<std::size_t>(idx) / s.m;
    const std::size_t i = static_cast<std::size_t>(idx) % s.m;
    detail::gemm_row(plain, i, a + bi * s.m * s.k, b_rows + bi * s.k * s.n, c + bi * s.m * s.n, accumulate);
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const std::uint8_t* mask,
                  double* y, bool log_space) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    detail::softmax_row(cols, x + off, mask == nullptr ? nullptr : mask + off, y + off, log_space);
  }
}

void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x, const double* gamma,
                     const double* beta, double eps, double* y, LayerNormStats stats) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    const auto ru = static_cast<std::size_t>(r);
    detail::layer_norm_row(cols, x + ru * cols, gamma, beta, eps, y + ru * cols, stats.mean[ru],
                           stats.rstd[ru]);
  }
}

void layer_norm_backward_rows(std::size_t rows, std::size_t cols, const double* x,
                              const double* gamma, const double* dy, LayerNormStats stats,
                              double* dx, double* dgamma, double* dbeta) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    const auto ru = static_cast<std::size_t>(r);
    detail::layer_norm_backward_row(cols, x + ru * cols, gamma, dy + ru * cols, stats.mean[ru],
                                    stats.rstd[ru], dx + ru * cols);
  }
  detail::layer_norm_param_grads(rows, cols, x, dy, stats, dgamma, dbeta);
}

}  // namespace parallel

namespace {
bool go_parallel(std::size_t work) { return work >= kParallelThreshold && omp_get_max_threads() > 1 && !omp_in_parallel(); }
}  // namespace

void gemm(const GemmShape& s, std::size_t batch, const double* a, const double* b, double* c,
          bool accumulate) {
  if (go_parallel(batch * s.m * s.n * s.k)) {
    parallel::gemm(s, batch, a, b, c, accumulate);
  } else {
    serial::gemm(s, batch, a, b, c, accumulate);
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const std::uint8_t* mask,
                  double* y, bool log_space) {
  if (go_parallel(rows * cols * 8)) {
    parallel::softmax_rows(rows, cols, x, mask, y, log_space);
  } else {
    serial::softmax_rows(rows, cols, x, mask, y, log_space);
  }
}

void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x, const double* gamma,
                     const double* beta, double eps, double* y, LayerNormStats stats) {
  if (go_parallel(rows * cols * 4)) {
    parallel::layer_norm_rows(rows, cols, x, gamma, beta, eps, y, stats);
  } else {
    serial::layer_norm_rows(rows, cols, x, gamma, beta, eps, y, stats);
  }
}

void layer_norm_backward_rows(std::size_t rows, std::size_t cols, const double* x,
                              const double* gamma, const double* dy, LayerNormStats stats,
                              double* dx, double* dgamma, double* dbeta) {
  if (go_parallel(rows * cols * 4)) {
    parallel::layer_norm_backward_rows(rows, cols, x, gamma, dy, stats, dx, dgamma, dbeta);
  } else {
    serial::layer_norm_backward_rows(rows, cols, x, gamma, dy, stats, dx, dgamma, dbeta);
  }
}

}  // namespace classic::kernels
