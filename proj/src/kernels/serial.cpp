#include "rows.hpp"

namespace classic::kernels::serial {

void gemm(const GemmShape& s, std::size_t batch, const double* a, const double* b, double* c,
          bool accumulate) {
  std::vector<double> scratch;
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const double* ab = a + bi * s.m * s.k;
    const double* bb = detail::gemm_b_rowmajor(s, b + bi * s.k * s.n, scratch);
    double* cb = c + bi * s.m * s.n;
    for (std::size_t i = 0; i < s.m; ++i) detail::gemm_row(s, i, ab, bb, cb, accumulate);
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const std::uint8_t* mask,
                  double* y, bool log_space) {
  for (std::size_t r = 0; r < rows; ++r) {
    detail::softmax_row(cols, x + r * cols, mask == nullptr ? nullptr : mask + r * cols, y + r * cols,
                        log_space);
  }
}

void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x, const double* gamma,
                     const double* beta, double eps, double* y, LayerNormStats stats) {
  for (std::size_t r = 0; r < rows; ++r) {
    detail::layer_norm_row(cols, x + r * cols, gamma, beta, eps, y + r * cols, stats.mean[r], stats.rstd[r]);
  }
}

void layer_norm_backward_rows(std::size_t rows, std::size_t cols, const double* x,
                              const double* gamma, const double* dy, LayerNormStats stats,
                              double* dx, double* dgamma, double* dbeta) {
  for (std::size_t r = 0; r < rows; ++r) {
    detail::layer_norm_backward_row(cols, x + r * cols, gamma, dy + r * cols, stats.mean[r],
                                    stats.rstd[r], dx + r * cols);
  }
  detail::layer_norm_param_grads(rows, cols, x, dy, stats, dgamma, dbeta);
}

}  // namespace classic::kernels::serial
