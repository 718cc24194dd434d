#include "classic/cli/grad_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "classic/attention/knowledge_attention.hpp"
#include "classic/autodiff/gradcheck.hpp"
#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/rng.hpp"
#include "classic/losses/losses.hpp"
#include "classic/masks/task_masks.hpp"
#include "classic/model/adapter_model.hpp"

namespace classic::cli {

namespace {

using ad::Shape;
using ad::Tensor;

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v), true);
}

/// Entries at least `gap` away from zero, so kinks stay outside the stencil.
Tensor away_from_zero(const Shape& shape, Rng& rng, double gap = 0.05) {
  Tensor t = random_tensor(shape, rng);
  for (double& x : t.mutable_values()) {
    if (std::abs(x) < gap) x = x < 0 ? -gap - 0.1 : gap + 0.1;
  }
  return t;
}

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 8) { return lo + rng.index(hi - lo + 1); }

std::vector<int> random_labels(std::size_t n, Rng& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.index(2));
  return y;
}

/// Reduces a tensor-valued function to a scalar with fixed random weights,
/// so every output coordinate contributes a distinct gradient.
ad::ScalarFn weighted(std::function<Tensor(const Tensor&)> op, Rng& rng) {
  auto weights = std::make_shared<Tensor>();
  auto seed = rng.next_u64();
  return [op = std::move(op), weights, seed](const Tensor& x) {
    Tensor y = op(x);
    if (!weights->defined() || weights->shape() != y.shape()) {
      Rng local(seed);
      std::vector<double> w(y.size());
      for (double& v : w) v = local.uniform(-1.0, 1.0);
      *weights = Tensor(y.shape(), std::move(w));
    }
    return ad::sum(ad::mul(y, *weights));
  };
}

/// Checks d f / d x for every listed input; f reads the inputs by reference.
double check_all(const std::vector<Tensor>& inputs, const std::function<Tensor()>& f) {
  return ad::finite_difference_check(f, inputs);
}

using Case = std::function<double(Rng&)>;

std::vector<std::pair<std::string, Case>> cases() {
  std::vector<std::pair<std::string, Case>> out;
  auto elementwise = [&](const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> op) {
    out.emplace_back(name, [op](Rng& rng) {
      const Shape s{dim(rng), dim(rng)};
      Tensor a = random_tensor(s, rng), b = random_tensor(s, rng), row = random_tensor({s[1]}, rng);
      auto f = weighted([&](const Tensor&) { return op(a, b); }, rng);
      auto g = weighted([&](const Tensor&) { return op(a, row); }, rng);
      return std::max(check_all({a, b}, [&] { return f(a); }), check_all({a, row}, [&] { return g(a); }));
    });
  };
  elementwise("add", [](const Tensor& a, const Tensor& b) { return ad::add(a, b); });
  elementwise("sub", [](const Tensor& a, const Tensor& b) { return ad::sub(a, b); });
  elementwise("mul", [](const Tensor& a, const Tensor& b) { return ad::mul(a, b); });

  auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> op,
                   std::function<Tensor(const Shape&, Rng&)> make) {
    out.emplace_back(name, [op, make](Rng& rng) {
      Tensor x = make({dim(rng), dim(rng, 2)}, rng);
      return ad::finite_difference_check(weighted(op, rng), x);
    });
  };
  auto plain = [](const Shape& s, Rng& rng) { return random_tensor(s, rng); };
  auto kinkless = [](const Shape& s, Rng& rng) { return away_from_zero(s, rng); };
  unary("scale", [](const Tensor& x) { return ad::scale(x, -1.7); }, plain);
  unary("sigmoid", [](const Tensor& x) { return ad::sigmoid(x); }, plain);
  unary("relu", [](const Tensor& x) { return ad::relu(x); }, kinkless);
  unary("exp", [](const Tensor& x) { return ad::exp(x); }, plain);
  unary("log", [](const Tensor& x) { return ad::log(x); },
        [](const Shape& s, Rng& rng) { return random_tensor(s, rng, 0.2, 2.0); });
  unary("softmax", [](const Tensor& x) { return ad::softmax(x); }, plain);
  unary("sum", [](const Tensor& x) { return ad::scale(ad::sum(x), 0.5); }, plain);
  unary("mean", [](const Tensor& x) { return ad::mean(x); }, plain);
  unary("l2_normalize", [](const Tensor& x) { return ad::l2_normalize(x); }, kinkless);
  unary("reshape", [](const Tensor& x) { return ad::reshape(x, {x.size()}); }, plain);
  unary("permute", [](const Tensor& x) { return ad::permute(x, {1, 0}); }, plain);
  unary("sum_axis", [](const Tensor& x) { return ad::sum_axis(x, 0); }, plain);
  unary("dropout", [](const Tensor& x) {
    Rng fixed(99);
    return ad::dropout(x, 0.7, fixed, true);
  }, plain);

  auto masked = [&](const std::string& name, bool log_space) {
    out.emplace_back(name, [log_space](Rng& rng) {
      const Shape s{dim(rng), dim(rng, 2)};
      Tensor x = random_tensor(s, rng);
      std::vector<std::uint8_t> mask(x.size());
      for (std::size_t r = 0; r < s[0]; ++r) {
        for (std::size_t c = 0; c < s[1]; ++c) mask[r * s[1] + c] = rng.bernoulli(0.6) ? 1 : 0;
        mask[r * s[1] + rng.index(s[1])] = 1;
      }
      auto f = weighted([&, log_space](const Tensor& v) {
        return log_space ? ad::masked_log_softmax(v, mask) : ad::masked_softmax(v, mask);
      }, rng);
      return ad::finite_difference_check(f, x);
    });
  };
  masked("masked_softmax", false);
  masked("masked_log_softmax", true);

  out.emplace_back("mul_scalar", [](Rng& rng) {
    Tensor a = random_tensor({dim(rng), dim(rng)}, rng), s = random_tensor({1}, rng);
    auto f = weighted([&](const Tensor&) { return ad::mul_scalar(a, s); }, rng);
    return check_all({a, s}, [&] { return f(a); });
  });
  out.emplace_back("matmul", [](Rng& rng) {
    const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng), bt = random_tensor({n, k}, rng);
    auto f = weighted([&](const Tensor&) { return ad::matmul(a, b); }, rng);
    auto g = weighted([&](const Tensor&) { return ad::matmul(a, bt, true); }, rng);
    return std::max(check_all({a, b}, [&] { return f(a); }), check_all({a, bt}, [&] { return g(a); }));
  });
  out.emplace_back("bmm", [](Rng& rng) {
    const std::size_t bs = dim(rng, 1, 3), m = dim(rng, 1, 4), k = dim(rng, 1, 4), n = dim(rng, 1, 4);
    Tensor a = random_tensor({bs, m, k}, rng), b = random_tensor({bs, k, n}, rng), bt = random_tensor({bs, n, k}, rng);
    auto f = weighted([&](const Tensor&) { return ad::bmm(a, b); }, rng);
    auto g = weighted([&](const Tensor&) { return ad::bmm(a, bt, true); }, rng);
    return std::max(check_all({a, b}, [&] { return f(a); }), check_all({a, bt}, [&] { return g(a); }));
  });
  out.emplace_back("concat", [](Rng& rng) {
    const std::size_t r = dim(rng), axis = rng.index(2);
    Tensor a = random_tensor({r, dim(rng)}, rng);
    Tensor b = axis == 1 ? random_tensor({r, dim(rng)}, rng) : random_tensor({dim(rng), a.dim(1)}, rng);
    auto f = weighted([&](const Tensor&) { return ad::concat({a, b}, axis); }, rng);
    return check_all({a, b}, [&] { return f(a); });
  });
  out.emplace_back("layer_norm", [](Rng& rng) {
    const std::size_t n = dim(rng), d = dim(rng, 2);
    Tensor x = random_tensor({n, d}, rng), g = random_tensor({d}, rng), b = random_tensor({d}, rng);
    auto f = weighted([&](const Tensor&) { return ad::layer_norm(x, g, b); }, rng);
    return check_all({x, g, b}, [&] { return f(x); });
  });
  out.emplace_back("gather_rows", [](Rng& rng) {
    const std::size_t v = dim(rng, 2);
    Tensor table = random_tensor({v, dim(rng)}, rng);
    std::vector<std::size_t> ids(dim(rng));
    for (auto& id : ids) id = rng.index(v);
    return ad::finite_difference_check(weighted([&](const Tensor& t) { return ad::gather_rows(t, ids); }, rng), table);
  });
  out.emplace_back("max_across", [](Rng& rng) {
    const Shape s{dim(rng), dim(rng)};
    std::vector<Tensor> xs;
    for (int k = 0; k < 3; ++k) xs.push_back(random_tensor(s, rng));
    // Keep competitors apart so no stencil crosses a switch of the maximiser.
    for (std::size_t i = 0; i < xs[0].size(); ++i) {
      for (int k = 1; k < 3; ++k) xs[static_cast<std::size_t>(k)].mutable_values()[i] = xs[0].at(i) + 0.3 * k - 0.3 + 0.05 * rng.uniform(-1, 1) + (rng.bernoulli(0.5) ? 0.6 : -0.6);
    }
    auto f = weighted([&](const Tensor&) { return ad::max_across(xs); }, rng);
    return check_all(xs, [&] { return f(xs[0]); });
  });
  out.emplace_back("compute_mask", [](Rng& rng) {
    Tensor e = random_tensor({dim(rng)}, rng, -0.5, 0.5);
    const double s = rng.uniform(0.5, 3.0);
    return ad::finite_difference_check(weighted([&](const Tensor& x) { return masks::compute_mask(x, s); }, rng), e);
  });

  out.emplace_back("ce_loss", [](Rng& rng) {
    const std::size_t n = dim(rng);
    Tensor z = random_tensor({n, 3}, rng);
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.index(3));
    return ad::finite_difference_check([&](const Tensor& x) { return losses::ce_loss(x, y); }, z);
  });
  out.emplace_back("csc_loss", [](Rng& rng) {
    const std::size_t n = dim(rng, 2, 4);
    Tensor h = away_from_zero({n, dim(rng, 3, 5)}, rng);
    const auto y = random_labels(n, rng);
    const double tau = rng.uniform(0.5, 2.0);
    return ad::finite_difference_check([&](const Tensor& x) { return losses::csc_loss(x, y, tau); }, h);
  });
  out.emplace_back("cks_loss", [](Rng& rng) {
    const std::size_t n = dim(rng, 2, 4), d = dim(rng, 3, 5);
    Tensor a = away_from_zero({n, d}, rng), b = away_from_zero({n, d}, rng);
    const auto y = random_labels(n, rng);
    return check_all({a, b}, [&] { return losses::cks_loss(a, b, y, 1.0); });
  });
  out.emplace_back("ced_pair_loss", [](Rng& rng) {
    const std::size_t n = dim(rng, 2, 4);
    Tensor t = random_tensor({n, 3}, rng), s = random_tensor({n, 3}, rng);
    const auto red = rng.bernoulli(0.5) ? losses::Reduction::kSum : losses::Reduction::kMean;
    return check_all({t, s}, [&] { return losses::ced_pair_loss(t, s, 1.0, red); });
  });
  out.emplace_back("ced_loss", [](Rng& rng) {
    const std::size_t n = dim(rng, 2, 4);
    std::vector<Tensor> views;
    for (int i = 0; i < 3; ++i) views.push_back(random_tensor({n, 3}, rng));
    const double a = check_all({views.back()}, [&] { return losses::ced_loss(views, 1.0, false); });
    const double b = check_all(views, [&] { return losses::ced_loss(views, 0.7, true); });
    return std::max(a, b);
  });
  out.emplace_back("total_loss", [](Rng& rng) {
    const std::size_t n = dim(rng, 2, 4);
    Tensor h = away_from_zero({n, dim(rng, 3, 5)}, rng), z = random_tensor({n, 3}, rng), t = random_tensor({n, 3}, rng);
    const auto y = random_labels(n, rng);
    losses::LossWeights w{rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), 1.0};
    return check_all({h, z}, [&] {
      losses::LossTerms terms{losses::ce_loss(z, y), losses::csc_loss(h, y, 1.0), losses::ced_loss({t, z}, 1.0, false),
                              losses::cks_loss(h, h, y, 1.0)};
      return losses::total_loss(terms, w).total;
    });
  });
  out.emplace_back("cks_view", [](Rng& rng) {
    const std::size_t n = dim(rng, 1, 4), d = dim(rng, 2, 5), t = dim(rng, 1, 3);
    Rng init(rng.next_u64());
    attention::AttentionParams p = attention::init_attention(d, init);
    p.gamma.mutable_values()[0] = rng.bernoulli(0.3) ? 0.0 : rng.uniform(-2, 2);
    std::vector<Tensor> views;
    for (std::size_t i = 0; i < t; ++i) views.push_back(random_tensor({n, d}, rng));
    auto f = weighted([&](const Tensor&) { return attention::cks_view(views, p); }, rng);
    std::vector<Tensor> inputs = views;
    for (const auto& w : p.tensors()) inputs.push_back(w);
    return check_all(inputs, [&] { return f(views[0]); });
  });
  out.emplace_back("masked_model", [](Rng& rng) {
    model::ModelConfig c;
    c.vocab_buckets = 16;
    c.d_model = 4;
    c.n_layers = 1;
    c.n_heads = 2;
    c.ffn_dim = 6;
    c.adapter_dim = 3;
    c.max_len = 8;
    c.dropout_p = 0.0;
    c.seed = rng.next_u64();
    model::AdapterModel m = model::init_model(c);
    for (const auto& p : m.trainable_parameters()) {
      Tensor t = p.tensor;
      for (double& v : t.mutable_values()) v += rng.uniform(-0.5, 0.5);
    }
    std::vector<data::Example> ex(3);
    for (std::size_t i = 0; i < ex.size(); ++i) {
      ex[i].sentence = {"w" + std::to_string(rng.index(9)), "w" + std::to_string(rng.index(9))};
      ex[i].aspect = {"a"};
      ex[i].label = static_cast<data::Label>(rng.index(3));
    }
    const auto batch = data::encode(ex, c.tokenizer(), 1);
    std::vector<Tensor> gates;
    for (std::size_t w : m.mask_widths()) gates.push_back(random_tensor({w}, rng, 0.0, 1.0));
    std::vector<Tensor> inputs;
    for (const auto& p : m.trainable_parameters()) inputs.push_back(p.tensor);
    return check_all(inputs, [&] {
      return losses::ce_loss(model::forward_masked(m, batch, gates, false, nullptr).logits, batch.labels);
    });
  });
  return out;
}

}  // namespace

std::vector<GradCheckResult> run_grad_suite(std::size_t trials, std::uint64_t seed, double tolerance) {
  std::vector<GradCheckResult> results;
  Rng root(seed);
  for (auto& [name, run] : cases()) {
    GradCheckResult r{name, trials, 0.0, true};
    Rng rng = root.fork(results.size());
    for (std::size_t i = 0; i < trials; ++i) r.max_error = std::max(r.max_error, run(rng));
    r.passed = r.max_error <= tolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace classic::cli
