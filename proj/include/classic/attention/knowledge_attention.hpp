#pragma once

#include <vector>

#include <json.hpp>

#include "classic/autodiff/rng.hpp"
#include "classic/autodiff/tensor.hpp"

namespace classic::attention {

using ad::Tensor;

/// Task attention parameters, shared by every task and never mask-protected.
/// Row-vector convention: a view row h maps to h W.
struct AttentionParams {
  Tensor w_f;    // [d, d]
  Tensor w_g;    // [d, d]
  Tensor w_v;    // [d, d]
  Tensor w_q;    // [d, d]
  Tensor gamma;  // [1], starts at 0

  std::vector<Tensor> tensors() const { return {w_f, w_g, w_v, w_q, gamma}; }
};

/// W entries N(0, 1/d), gamma exactly 0, all trainable.
AttentionParams init_attention(std::size_t d_model, Rng& rng);

/// Per sample, over the task axis of views h_1..h_t (each [N, d]):
///   s[j,i] = (h_i W_f) . (h_j W_g),  alpha[j,:] = softmax_i s[j,i]
///   o_j = (sum_i alpha[j,i] h_i W_q) W_v
///   out = gamma sum_j o_j + sum_j h_j
Tensor cks_view(const std::vector<Tensor>& views, const AttentionParams& params);

/// alpha as [N, t, t] (row j holds the weights over i), off the tape.
Tensor attention_weights(const std::vector<Tensor>& views, const AttentionParams& params);

/// {"gamma", "alpha": [[[...]]] per sample} for inspection.
nlohmann::json alpha_report(const std::vector<Tensor>& views, const AttentionParams& params);

}  // namespace classic::attention
