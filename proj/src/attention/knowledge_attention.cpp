#include "classic/attention/knowledge_attention.hpp"

#include <cmath>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/error.hpp"

namespace classic::attention {

namespace {

Tensor random_square(std::size_t d, Rng& rng) {
  std::vector<double> v(d * d);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& x : v) x = rng.normal() * sd;
  return Tensor({d, d}, std::move(v), true);
}

struct Stacked {
  std::size_t n = 0, t = 0, d = 0;
  Tensor rows;  // [N*t, d], sample-major
  Tensor h;     // [N, t, d]
};

Stacked stack_views(const std::vector<Tensor>& views, const AttentionParams& params) {
  if (views.empty()) throw ShapeError("cks_view: needs at least one view");
  const Tensor& first = views.front();
  if (first.rank() != 2) throw ShapeError("cks_view: views must be [N, d], got " + ad::shape_str(first.shape()));
  for (const auto& v : views) {
    if (v.shape() != first.shape()) {
      throw ShapeError("cks_view: view " + ad::shape_str(v.shape()) + " vs " + ad::shape_str(first.shape()));
    }
  }
  Stacked s{first.dim(0), views.size(), first.dim(1), {}, {}};
  const ad::Shape square{s.d, s.d};
  for (const Tensor* w : {&params.w_f, &params.w_g, &params.w_v, &params.w_q}) {
    if (w->shape() != square) {
      throw ShapeError("cks_view: weight " + ad::shape_str(w->shape()) + " vs views of width " + std::to_string(s.d));
    }
  }
  s.h = ad::reshape(ad::concat(views, 1), {s.n, s.t, s.d});
  s.rows = ad::reshape(s.h, {s.n * s.t, s.d});
  return s;
}

Tensor project(const Stacked& s, const Tensor& w) { return ad::reshape(ad::matmul(s.rows, w), {s.n, s.t, s.d}); }

Tensor alpha_of(const Stacked& s, const AttentionParams& params) {
  const Tensor f = project(s, params.w_f);
  const Tensor g = project(s, params.w_g);
  return ad::softmax(ad::bmm(g, f, /*trans_b=*/true));  // [N, j, i]
}

}  // namespace

AttentionParams init_attention(std::size_t d_model, Rng& rng) {
  AttentionParams p;
  p.w_f = random_square(d_model, rng);
  p.w_g = random_square(d_model, rng);
  p.w_v = random_square(d_model, rng);
  p.w_q = random_square(d_model, rng);
  p.gamma = Tensor::scalar(0.0, true);
  return p;
}

Tensor cks_view(const std::vector<Tensor>& views, const AttentionParams& params) {
  const Stacked s = stack_views(views, params);
  const Tensor alpha = alpha_of(s, params);
  const Tensor mixed = ad::bmm(alpha, project(s, params.w_q));                        // [N, t, d]
  const Tensor o = ad::matmul(ad::reshape(mixed, {s.n * s.t, s.d}), params.w_v);      // [N*t, d]
  const Tensor attended = ad::sum_axis(ad::reshape(o, {s.n, s.t, s.d}), 1);           // [N, d]
  return ad::add(ad::mul_scalar(attended, params.gamma), ad::sum_axis(s.h, 1));
}

Tensor attention_weights(const std::vector<Tensor>& views, const AttentionParams& params) {
  ad::NoGradScope no_grad;
  return alpha_of(stack_views(views, params), params);
}

nlohmann::json alpha_report(const std::vector<Tensor>& views, const AttentionParams& params) {
  const Tensor alpha = attention_weights(views, params);
  const std::size_t n = alpha.dim(0), t = alpha.dim(1);
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t r = 0; r < n; ++r) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < t; ++j) {
      std::vector<double> row(t);
      for (std::size_t i = 0; i < t; ++i) row[i] = alpha.at((r * t + j) * t + i);
      rows.push_back(row);
    }
    samples.push_back(rows);
  }
  return {{"gamma", params.gamma.item()}, {"tasks", t}, {"alpha", samples}};
}

}  // namespace classic::attention
