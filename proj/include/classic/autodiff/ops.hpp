#pragma once

#include <cstdint>
#include <vector>

#include "classic/autodiff/rng.hpp"
#include "classic/autodiff/tensor.hpp"

// Differentiable tensor ops. Every op checks operand shapes (ShapeError naming
// the op and shapes), rejects non-finite outputs (NumericError), and records
// itself on the active tape when an input requires gradient.
//
// Broadcasting is limited to "suffix" form: in add/sub/mul the second operand
// may have the shape of the first operand's trailing dimensions (a bias row, a
// per-unit mask) and is repeated over the leading ones.

namespace classic::ad {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a * s where s holds a single value (e.g. a trainable gate).
Tensor mul_scalar(const Tensor& a, const Tensor& s);

/// [m,k] x [k,n] -> [m,n]; with trans_b, b is stored [n,k].
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_b = false);
/// Batched [B,m,k] x [B,k,n] -> [B,m,n]; with trans_b, b is [B,n,k].
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

/// Softmax over the last axis.
Tensor softmax(const Tensor& x);
/// Softmax over the last axis restricted to entries where mask != 0 (mask
/// has x's shape); excluded entries output 0. Each row needs one kept entry.
Tensor masked_softmax(const Tensor& x, const std::vector<std::uint8_t>& mask);
Tensor masked_log_softmax(const Tensor& x, const std::vector<std::uint8_t>& mask);

/// Scalar [1] results.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sum over one axis, which is removed from the shape.
Tensor sum_axis(const Tensor& x, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);

/// Normalises the last axis, then applies gamma/beta (each [last dim]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-12);

/// Rows of a [V, d] table picked by id -> [ids.size(), d]. Also used to pick
/// positions (e.g. the [CLS] row) out of a flattened activation.
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids);

/// Unit Euclidean norm over the last axis. A zero row stays zero and bumps
/// l2_normalize_zero_rows().
Tensor l2_normalize(const Tensor& x);
std::uint64_t l2_normalize_zero_rows();

/// Inverted dropout: kept entries are scaled by 1/keep_prob. Identity when
/// !training or keep_prob == 1.
Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool training);

/// Elementwise max over same-shaped tensors; gradient goes to the first
/// maximiser.
Tensor max_across(const std::vector<Tensor>& xs);

/// Same values, cut from the tape.
Tensor detach(const Tensor& x);

}  // namespace classic::ad
