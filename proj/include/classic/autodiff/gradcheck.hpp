#pragma once

#include <functional>

#include "classic/autodiff/tensor.hpp"

namespace classic::ad {

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Compares the tape gradient of scalar f at x with central differences.
/// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|).
/// f must be deterministic; other tensors it closes over are left untouched.
/// Throws NumericError if f is non-finite at a probe point.
double finite_difference_check(const ScalarFn& f, const Tensor& x, double step = 1e-4);

/// Same comparison for a closure over several inputs: the analytic gradient
/// of f() w.r.t. every input comes from one backward pass, the numeric one
/// from perturbing each input in place (restored afterwards). Inputs must
/// require gradient. Returns the worst error over all inputs.
double finite_difference_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                               double step = 1e-4);

/// The analytic gradient alone (same conventions as above).
std::vector<double> tape_gradient(const ScalarFn& f, const Tensor& x);

}  // namespace classic::ad
