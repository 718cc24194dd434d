#include "classic/autodiff/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

#include "classic/autodiff/tape.hpp"
#include "classic/error.hpp"
#include "classic/kernels/kernels.hpp"

namespace classic::ad {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

std::atomic<std::uint64_t> g_zero_norm_rows{0};

std::vector<double>& grad_of(TensorNode& node) {
  if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
  return node.grad;
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw ShapeError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

Tensor finish(const std::string& op, Shape shape, std::vector<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(op + ": non-finite output");
  }
  return Tensor(std::move(shape), std::move(values));
}

/// Records `fn` for `out` if any input requires gradient.
template <typename Fn>
void record(Tensor& out, std::initializer_list<const Tensor*> inputs, Fn&& fn) {
  if (!should_record(inputs)) return;
  out.set_requires_grad(true);
  active_tape()->record(out, std::forward<Fn>(fn));
}

bool wants_grad(const NodePtr& node) { return node && node->requires_grad; }

/// Number of times b repeats inside a under suffix broadcasting.
std::size_t suffix_repeats(const std::string& op, const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()))) {
    shape_error(op, as, bs);
  }
  return a.size() / std::max<std::size_t>(b.size(), 1);
}

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const std::string& op, Binary kind, const Tensor& a, const Tensor& b) {
  const std::size_t outer = suffix_repeats(op, a, b);
  const std::size_t inner = b.size();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(a.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t i = o * inner + j;
      switch (kind) {
        case Binary::kAdd: out[i] = av[i] + bv[j]; break;
        case Binary::kSub: out[i] = av[i] - bv[j]; break;
        case Binary::kMul: out[i] = av[i] * bv[j]; break;
      }
    }
  }
  Tensor y = finish(op, a.shape(), std::move(out));
  record(y, {&a, &b}, [an = a.node(), bn = b.node(), kind, outer, inner](std::span<const double> g) {
    if (wants_grad(an)) {
      auto& ga = grad_of(*an);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) {
          const std::size_t i = o * inner + j;
          ga[i] += kind == Binary::kMul ? g[i] * bn->values[j] : g[i];
        }
      }
    }
    if (wants_grad(bn)) {
      auto& gb = grad_of(*bn);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) {
          const std::size_t i = o * inner + j;
          switch (kind) {
            case Binary::kAdd: gb[j] += g[i]; break;
            case Binary::kSub: gb[j] -= g[i]; break;
            case Binary::kMul: gb[j] += g[i] * an->values[i]; break;
          }
        }
      }
    }
  });
  return y;
}

template <typename F, typename D>
Tensor unary(const std::string& op, const Tensor& x, F f, D dfdx_from_x_y) {
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tensor y = finish(op, x.shape(), std::move(out));
  record(y, {&x}, [xn = x.node(), yn = y.node(), dfdx_from_x_y](std::span<const double> g) {
    auto& gx = grad_of(*xn);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * dfdx_from_x_y(xn->values[i], yn->values[i]);
  });
  return y;
}

/// Shared body of the (masked) softmax family.
Tensor softmax_impl(const std::string& op, const Tensor& x, const std::uint8_t* mask_ptr,
                    std::vector<std::uint8_t> mask, bool log_space) {
  if (x.rank() == 0 || x.shape().back() == 0) throw ShapeError(op + ": empty last axis");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  if (mask_ptr != nullptr) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto* row = mask_ptr + r * cols;
      if (std::none_of(row, row + cols, [](std::uint8_t m) { return m != 0; })) {
        throw ShapeError(op + ": row " + std::to_string(r) + " has no unmasked entry");
      }
    }
  }
  std::vector<double> out(x.size());
  kernels::softmax_rows(rows, cols, x.values().data(), mask_ptr, out.data(), log_space);
  Tensor y = finish(op, x.shape(), std::move(out));
  record(y, {&x}, [xn = x.node(), yn = y.node(), rows, cols, log_space, mask = std::move(mask)](std::span<const double> g) {
    auto& gx = grad_of(*xn);
    const auto& yv = yn->values;
    const bool masked = !mask.empty();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t off = r * cols;
      auto kept = [&](std::size_t j) { return !masked || mask[off + j] != 0; };
      if (log_space) {
        double gsum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          if (kept(j)) gsum += g[off + j];
        }
        for (std::size_t j = 0; j < cols; ++j) {
          if (kept(j)) gx[off + j] += g[off + j] - std::exp(yv[off + j]) * gsum;
        }
      } else {
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += g[off + j] * yv[off + j];
        for (std::size_t j = 0; j < cols; ++j) {
          if (kept(j)) gx[off + j] += yv[off + j] * (g[off + j] - dot);
        }
      }
    }
  });
  return y;
}

Tensor masked_softmax_family(const std::string& op, const Tensor& x, const std::vector<std::uint8_t>& mask,
                             bool log_space) {
  if (mask.size() != x.size()) {
    throw ShapeError(op + ": mask has " + std::to_string(mask.size()) + " entries for tensor " + shape_str(x.shape()));
  }
  return softmax_impl(op, x, mask.data(), mask, log_space);
}

Tensor gemm_op(const std::string& op, const Tensor& a, const Tensor& b, bool trans_b, bool batched) {
  const std::size_t lead = batched ? 1 : 0;
  if (a.rank() != 2 + lead || b.rank() != 2 + lead || (batched && a.dim(0) != b.dim(0))) {
    shape_error(op, a.shape(), b.shape());
  }
  const std::size_t batch = batched ? a.dim(0) : 1;
  const std::size_t m = a.dim(lead);
  const std::size_t k = a.dim(lead + 1);
  const std::size_t bk = trans_b ? b.dim(lead + 1) : b.dim(lead);
  const std::size_t n = trans_b ? b.dim(lead) : b.dim(lead + 1);
  if (k != bk) shape_error(op, a.shape(), b.shape());

  std::vector<double> out(batch * m * n);
  kernels::gemm({m, n, k, false, trans_b}, batch, a.values().data(), b.values().data(), out.data(), false);
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  Tensor y = finish(op, std::move(shape), std::move(out));
  record(y, {&a, &b}, [an = a.node(), bn = b.node(), batch, m, n, k, trans_b](std::span<const double> g) {
    if (wants_grad(an)) {
      // dA = G . op(B)^T
      kernels::gemm({m, k, n, false, !trans_b}, batch, g.data(), bn->values.data(), grad_of(*an).data(), true);
    }
    if (wants_grad(bn)) {
      if (trans_b) {
        // dB[n,k] = G^T . A
        kernels::gemm({n, k, m, true, false}, batch, g.data(), an->values.data(), grad_of(*bn).data(), true);
      } else {
        // dB[k,n] = A^T . G
        kernels::gemm({k, n, m, true, false}, batch, an->values.data(), g.data(), grad_of(*bn).data(), true);
      }
    }
  });
  return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", Binary::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", Binary::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", Binary::kMul, a, b); }

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) shape_error("mul_scalar", a.shape(), s.shape());
  const double sv = s.values()[0];
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * sv;
  Tensor y = finish("mul_scalar", a.shape(), std::move(out));
  record(y, {&a, &s}, [an = a.node(), sn = s.node()](std::span<const double> g) {
    if (wants_grad(an)) {
      auto& ga = grad_of(*an);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * sn->values[0];
    }
    if (wants_grad(sn)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * an->values[i];
      grad_of(*sn)[0] += acc;
    }
  });
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_b) { return gemm_op("matmul", a, b, trans_b, false); }
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) { return gemm_op("bmm", a, b, trans_b, true); }

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x) { return softmax_impl("softmax", x, nullptr, {}, false); }

Tensor masked_softmax(const Tensor& x, const std::vector<std::uint8_t>& mask) {
  return masked_softmax_family("masked_softmax", x, mask, false);
}

Tensor masked_log_softmax(const Tensor& x, const std::vector<std::uint8_t>& mask) {
  return masked_softmax_family("masked_log_softmax", x, mask, true);
}

Tensor sum(const Tensor& x) {
  auto xv = x.values();
  Tensor y = finish("sum", {1}, {std::accumulate(xv.begin(), xv.end(), 0.0)});
  record(y, {&x}, [xn = x.node()](std::span<const double> g) {
    for (double& v : grad_of(*xn)) v += g[0];
  });
  return y;
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("sum_axis: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
  const Shape& s = x.shape();
  const std::size_t outer = shape_numel(Shape(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t len = s[axis];
  const std::size_t inner = shape_numel(Shape(s.begin() + static_cast<std::ptrdiff_t>(axis) + 1, s.end()));
  std::vector<double> out(outer * inner, 0.0);
  auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < len; ++a) {
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += xv[(o * len + a) * inner + i];
    }
  }
  Shape shape = s;
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  Tensor y = finish("sum_axis", std::move(shape), std::move(out));
  record(y, {&x}, [xn = x.node(), outer, len, inner](std::span<const double> g) {
    auto& gx = grad_of(*xn);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t a = 0; a < len; ++a) {
        for (std::size_t i = 0; i < inner; ++i) gx[(o * len + a) * inner + i] += g[o * inner + i];
      }
    }
  });
  return y;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(first));
  Shape shape = first;
  shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& ps = p.shape();
    if (ps.size() != first.size()) shape_error("concat", first, ps);
    for (std::size_t d = 0; d < ps.size(); ++d) {
      if (d != axis && ps[d] != first[d]) shape_error("concat", first, ps);
    }
    shape[axis] += ps[axis];
  }
  const std::size_t outer = shape_numel(Shape(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t inner = shape_numel(Shape(first.begin() + static_cast<std::ptrdiff_t>(axis) + 1, first.end()));
  const std::size_t out_stride = shape[axis] * inner;
  std::vector<double> out(shape_numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_stride + offset));
    }
    offset += chunk;
  }
  Tensor y = finish("concat", std::move(shape), std::move(out));
  if (should_record(parts)) {
    y.set_requires_grad(true);
    std::vector<NodePtr> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node());
    active_tape()->record(y, [nodes, offsets, outer, inner, axis, out_stride](std::span<const double> g) {
      for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
        if (!wants_grad(nodes[pi])) continue;
        auto& gp = grad_of(*nodes[pi]);
        const std::size_t chunk = nodes[pi]->shape[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += g[o * out_stride + offsets[pi] + i];
        }
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  auto xv = x.values();
  Tensor y(std::move(shape), std::vector<double>(xv.begin(), xv.end()));
  record(y, {&x}, [xn = x.node()](std::span<const double> g) {
    auto& gx = grad_of(*xn);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
  return y;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const Shape& in = x.shape();
  const std::size_t rank = in.size();
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted.size() != rank || sorted[i] != i) throw ShapeError("permute: invalid axis order for " + shape_str(in));
  }
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_strides[d - 1] = in_strides[d] * in[d];
  Shape out_shape(rank);
  std::vector<std::size_t> src_strides(rank);  // input stride along each output axis
  for (std::size_t d = 0; d < rank; ++d) {
    out_shape[d] = in[order[d]];
    src_strides[d] = in_strides[order[d]];
  }
  // source[i] = input flat index feeding output flat index i
  std::vector<std::size_t> source(x.size());
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    source[i] = src;
    for (std::size_t d = rank; d-- > 0;) {
      src += src_strides[d];
      if (++counter[d] < out_shape[d]) break;
      src -= src_strides[d] * out_shape[d];
      counter[d] = 0;
    }
  }
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[source[i]];
  Tensor y(std::move(out_shape), std::move(out));
  record(y, {&x}, [xn = x.node(), source = std::move(source)](std::span<const double> g) {
    auto& gx = grad_of(*xn);
    for (std::size_t i = 0; i < source.size(); ++i) gx[source[i]] += g[i];
  });
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0 || gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != x.shape().back() ||
      beta.dim(0) != x.shape().back()) {
    shape_error("layer_norm", x.shape(), gamma.shape());
  }
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  std::vector<double> out(x.size());
  auto stats_mean = std::make_shared<std::vector<double>>(rows);
  auto stats_rstd = std::make_shared<std::vector<double>>(rows);
  kernels::layer_norm_rows(rows, cols, x.values().data(), gamma.values().data(), beta.values().data(), eps,
                           out.data(), {stats_mean->data(), stats_rstd->data()});
  Tensor y = finish("layer_norm", x.shape(), std::move(out));
  record(y, {&x, &gamma, &beta},
         [xn = x.node(), gn = gamma.node(), bn = beta.node(), rows, cols, stats_mean, stats_rstd](std::span<const double> g) {
           std::vector<double> dx(rows * cols);
           kernels::layer_norm_backward_rows(rows, cols, xn->values.data(), gn->values.data(), g.data(),
                                             {stats_mean->data(), stats_rstd->data()}, dx.data(),
                                             wants_grad(gn) ? grad_of(*gn).data() : nullptr,
                                             wants_grad(bn) ? grad_of(*bn).data() : nullptr);
           if (wants_grad(xn)) {
             auto& gx = grad_of(*xn);
             for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
           }
         });
  return y;
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
  if (table.rank() != 2) throw ShapeError("gather_rows: table must be 2-d, got " + shape_str(table.shape()));
  const std::size_t rows = table.dim(0);
  const std::size_t cols = table.dim(1);
  std::vector<double> out(ids.size() * cols);
  auto tv = table.values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= rows) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[r]) + " out of range for " + shape_str(table.shape()));
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[r] * cols), cols, out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  Tensor y(Shape{ids.size(), cols}, std::move(out));
  record(y, {&table}, [tn = table.node(), ids, cols](std::span<const double> g) {
    auto& gt = grad_of(*tn);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) gt[ids[r] * cols + c] += g[r * cols + c];
    }
  });
  return y;
}

Tensor l2_normalize(const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0) throw ShapeError("l2_normalize: empty last axis");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  auto xv = x.values();
  std::vector<double> out(x.size(), 0.0);
  auto norms = std::make_shared<std::vector<double>>(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += xv[r * cols + c] * xv[r * cols + c];
    const double norm = std::sqrt(sq);
    (*norms)[r] = norm;
    if (norm == 0.0) {
      g_zero_norm_rows.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] / norm;
  }
  Tensor y = finish("l2_normalize", x.shape(), std::move(out));
  record(y, {&x}, [xn = x.node(), yn = y.node(), norms, rows, cols](std::span<const double> g) {
    auto& gx = grad_of(*xn);
    const auto& yv = yn->values;
    for (std::size_t r = 0; r < rows; ++r) {
      const double norm = (*norms)[r];
      if (norm == 0.0) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += yv[r * cols + c] * g[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        gx[r * cols + c] += (g[r * cols + c] - yv[r * cols + c] * dot) / norm;
      }
    }
  });
  return y;
}

std::uint64_t l2_normalize_zero_rows() { return g_zero_norm_rows.load(std::memory_order_relaxed); }

Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool training) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw Error("dropout: keep probability " + std::to_string(keep_prob) + " outside (0, 1]");
  }
  if (!training || keep_prob == 1.0) return x;
  std::vector<double> factor(x.size());
  for (double& f : factor) f = rng.bernoulli(keep_prob) ? 1.0 / keep_prob : 0.0;
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor[i];
  Tensor y = finish("dropout", x.shape(), std::move(out));
  record(y, {&x}, [xn = x.node(), factor = std::move(factor)](std::span<const double> g) {
    auto& gx = grad_of(*xn);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * factor[i];
  });
  return y;
}

Tensor max_across(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("max_across: no inputs");
  const Shape& shape = xs.front().shape();
  for (const Tensor& t : xs) {
    if (t.shape() != shape) shape_error("max_across", shape, t.shape());
  }
  std::vector<double> out(xs.front().values().begin(), xs.front().values().end());
  std::vector<std::size_t> winner(out.size(), 0);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    auto v = xs[k].values();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        winner[i] = k;
      }
    }
  }
  Tensor y = finish("max_across", shape, std::move(out));
  if (should_record(xs)) {
    y.set_requires_grad(true);
    std::vector<NodePtr> nodes;
    for (const Tensor& t : xs) nodes.push_back(t.node());
    active_tape()->record(y, [nodes, winner = std::move(winner)](std::span<const double> g) {
      for (std::size_t i = 0; i < winner.size(); ++i) {
        const NodePtr& n = nodes[winner[i]];
        if (wants_grad(n)) grad_of(*n)[i] += g[i];
      }
    });
  }
  return y;
}

Tensor detach(const Tensor& x) {
  auto xv = x.values();
  return Tensor(x.shape(), std::vector<double>(xv.begin(), xv.end()));
}

}  // namespace classic::ad
