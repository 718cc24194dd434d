#include "classic/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "classic/autodiff/tape.hpp"
#include "classic/error.hpp"

namespace classic::ad {

namespace {

double evaluate(const ScalarFn& f, const Tensor& x) {
  NoGradScope no_grad;
  const double value = f(x).item();
  if (!std::isfinite(value)) throw NumericError("finite_difference_check: f is non-finite at a probe point");
  return value;
}

}  // namespace

std::vector<double> tape_gradient(const ScalarFn& f, const Tensor& x) {
  if (x.size() == 0) return {};
  Tensor probe = x.clone();
  probe.set_requires_grad(true);
  probe.zero_grad();
  TapeScope scope;
  Tensor loss = f(probe);
  scope.backward(loss);
  auto g = probe.grad();
  return {g.begin(), g.end()};
}

double finite_difference_check(const ScalarFn& f, const Tensor& x, double step) {
  if (!(step > 0.0)) throw Error("finite_difference_check: step must be positive");
  const std::vector<double> analytic = tape_gradient(f, x);
  double worst = 0.0;
  Tensor probe = x.clone();
  probe.set_requires_grad(false);
  auto pv = probe.mutable_values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double saved = pv[i];
    pv[i] = saved + step;
    const double up = evaluate(f, probe);
    pv[i] = saved - step;
    const double down = evaluate(f, probe);
    pv[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

double finite_difference_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double step) {
  if (!(step > 0.0)) throw Error("finite_difference_check: step must be positive");
  std::vector<std::vector<double>> analytic;
  {
    for (Tensor x : inputs) {
      if (!x.requires_grad()) throw Error("finite_difference_check: every input must require gradient");
      x.zero_grad();
    }
    TapeScope scope;
    scope.backward(f());
    for (const Tensor& x : inputs) {
      const auto g = x.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
  }
  auto value = [&] {
    NoGradScope no_grad;
    const double v = f().item();
    if (!std::isfinite(v)) throw NumericError("finite_difference_check: f is non-finite at a probe point");
    return v;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor x = inputs[k];
    auto xv = x.mutable_values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double saved = xv[i];
      xv[i] = saved + step;
      const double up = value();
      xv[i] = saved - step;
      const double down = value();
      xv[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace classic::ad
