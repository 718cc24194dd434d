#pragma once

#include <cstddef>
#include <cstdint>

// Dense inner loops behind the autodiff ops. Two implementations share one
// per-row body: `serial` is the reference, `parallel` distributes output rows
// over OpenMP threads. Each output element is produced by exactly one thread
// in the same accumulation order, so both give bit-identical results.
//
// The functions directly in `kernels` dispatch: parallel when the work is
// large and we are not already inside a parallel region, serial otherwise.

namespace classic::kernels {

struct GemmShape {
  std::size_t m = 0;  // rows of C
  std::size_t n = 0;  // cols of C
  std::size_t k = 0;  // contraction length
  bool trans_a = false;  // A stored [k, m] instead of [m, k]
  bool trans_b = false;  // B stored [n, k] instead of [k, n]
};

struct LayerNormStats {
  double* mean;  // [rows]
  double* rstd;  // [rows]
};

/// Work (multiply-adds) above which the dispatcher goes parallel.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;

namespace serial {

/// C[m,n] (+)= op(A) . op(B), repeated over `batch` contiguous blocks.
void gemm(const GemmShape& s, std::size_t batch, const double* a, const double* b, double* c,
          bool accumulate);
/// Row-wise softmax (or log-softmax). Entries with mask 0 are left out of the
/// normaliser and written as 0; a null mask keeps every entry.
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const std::uint8_t* mask,
                  double* y, bool log_space);
void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x, const double* gamma,
                     const double* beta, double eps, double* y, LayerNormStats stats);
/// Writes dx; accumulates into dgamma/dbeta when they are non-null.
void layer_norm_backward_rows(std::size_t rows, std::size_t cols, const double* x,
                              const double* gamma, const double* dy, LayerNormStats stats,
                              double* dx, double* dgamma, double* dbeta);

}  // namespace serial

namespace parallel {

void gemm(const GemmShape& s, std::size_t batch, const double* a, const double* b, double* c,
          bool accumulate);
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const std::uint8_t* mask,
                  double* y, bool log_space);
void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x, const double* gamma,
                     const double* beta, double eps, double* y, LayerNormStats stats);
void layer_norm_backward_rows(std::size_t rows, std::size_t cols, const double* x,
                              const double* gamma, const double* dy, LayerNormStats stats,
                              double* dx, double* dgamma, double* dbeta);

}  // namespace parallel

void gemm(const GemmShape& s, std::size_t batch, const double* a, const double* b, double* c,
          bool accumulate);
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const std::uint8_t* mask,
                  double* y, bool log_space);
void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x, const double* gamma,
                     const double* beta, double eps, double* y, LayerNormStats stats);
void layer_norm_backward_rows(std::size_t rows, std::size_t cols, const double* x,
                              const double* gamma, const double* dy, LayerNormStats stats,
                              double* dx, double* dgamma, double* dbeta);

}  // namespace classic::kernels
