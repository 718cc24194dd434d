#pragma once

// Per-row bodies shared by the serial and parallel kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "classic/kernels/kernels.hpp"

namespace classic::kernels::detail {

/// B as [k, n] row-major; transposes into `scratch` when stored [n, k].
inline const double* gemm_b_rowmajor(const GemmShape& s, const double* b, std::vector<double>& scratch) {
  if (!s.trans_b) return b;
  scratch.resize(s.k * s.n);
  for (std::size_t j = 0; j < s.n; ++j) {
    for (std::size_t p = 0; p < s.k; ++p) scratch[p * s.n + j] = b[j * s.k + p];
  }
  return scratch.data();
}

/// Row i of C = op(A) . B, with B already [k, n].
inline void gemm_row(const GemmShape& s, std::size_t i, const double* a, const double* b, double* c,
                     bool accumulate) {
  double* crow = c + i * s.n;
  if (!accumulate) std::fill(crow, crow + s.n, 0.0);
  for (std::size_t p = 0; p < s.k; ++p) {
    const double aip = s.trans_a ? a[p * s.m + i] : a[i * s.k + p];
    if (aip == 0.0) continue;
    const double* brow = b + p * s.n;
    for (std::size_t j = 0; j < s.n; ++j) crow[j] += aip * brow[j];
  }
}

inline void softmax_row(std::size_t cols, const double* x, const std::uint8_t* mask, double* y,
                        bool log_space) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cols; ++j) {
    if (mask == nullptr || mask[j] != 0) peak = std::max(peak, x[j]);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    if (mask == nullptr || mask[j] != 0) total += std::exp(x[j] - peak);
  }
  const double log_total = std::log(total);
  for (std::size_t j = 0; j < cols; ++j) {
    if (mask != nullptr && mask[j] == 0) {
      y[j] = 0.0;
    } else if (log_space) {
      y[j] = x[j] - peak - log_total;
    } else {
      y[j] = std::exp(x[j] - peak) / total;
    }
  }
}

inline void layer_norm_row(std::size_t cols, const double* x, const double* gamma, const double* beta,
                           double eps, double* y, double& mean_out, double& rstd_out) {
  double mean = 0.0;
  for (std::size_t j = 0; j < cols; ++j) mean += x[j];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) var += (x[j] - mean) * (x[j] - mean);
  var /= static_cast<double>(cols);
  const double rstd = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < cols; ++j) y[j] = (x[j] - mean) * rstd * gamma[j] + beta[j];
  mean_out = mean;
  rstd_out = rstd;
}

inline void layer_norm_backward_row(std::size_t cols, const double* x, const double* gamma,
                                    const double* dy, double mean, double rstd, double* dx) {
  double mean_dxhat = 0.0;
  double mean_dxhat_xhat = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double xhat = (x[j] - mean) * rstd;
    const double dxhat = dy[j] * gamma[j];
    mean_dxhat += dxhat;
    mean_dxhat_xhat += dxhat * xhat;
  }
  mean_dxhat /= static_cast<double>(cols);
  mean_dxhat_xhat /= static_cast<double>(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const double xhat = (x[j] - mean) * rstd;
    dx[j] = rstd * (dy[j] * gamma[j] - mean_dxhat - xhat * mean_dxhat_xhat);
  }
}

/// Column reductions over rows in row order; kept serial in both variants.
inline void layer_norm_param_grads(std::size_t rows, std::size_t cols, const double* x, const double* dy,
                                   LayerNormStats stats, double* dgamma, double* dbeta) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    const double* dyr = dy + r * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (dgamma != nullptr) dgamma[j] += dyr[j] * (xr[j] - stats.mean[r]) * stats.rstd[r];
      if (dbeta != nullptr) dbeta[j] += dyr[j];
    }
  }
}

}  // namespace classic::kernels::detail
