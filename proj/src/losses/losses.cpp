#include "classic/losses/losses.hpp"

#include <cmath>
#include <map>

#include "classic/autodiff/ops.hpp"
#include "classic/data/example.hpp"
#include "classic/error.hpp"

namespace classic::losses {

namespace {

void check_temperature(double tau) {
  if (!(tau > 0.0)) throw Error("contrastive loss: temperature must be positive");
}

void check_labels(const std::vector<int>& labels, std::size_t rows, const char* op) {
  if (labels.size() != rows) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                     " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(data::kNumClasses)) {
      throw Error(std::string(op) + ": label " + std::to_string(y) + " outside {0,1,2}");
    }
  }
}

std::vector<std::uint8_t> off_diagonal(std::size_t n) {
  std::vector<std::uint8_t> mask(n * n, 1);
  for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 0;
  return mask;
}

/// weight[n, j] = 1/(N_{y_n} - 1) for j != n with y_j == y_n.
Tensor same_label_weights(const std::vector<int>& labels) {
  const std::size_t n = labels.size();
  std::map<int, std::size_t> counts;
  for (int y : labels) ++counts[y];
  std::vector<double> w(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t same = counts[labels[a]];
    if (same < 2) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != a && labels[j] == labels[a]) w[a * n + j] = 1.0 / static_cast<double>(same - 1);
    }
  }
  return Tensor({n, n}, std::move(w));
}

void check_finite(const Tensor& t, const char* name) {
  if (!std::isfinite(t.item())) throw NumericError(std::string("total_loss: component ") + name + " is non-finite");
}

}  // namespace

std::string Ablation::label() const {
  const int code = (no_csc ? 1 : 0) | (no_cks ? 2 : 0) | (no_ced ? 4 : 0);
  static const char* const kNames[] = {"full",      "-CSC",      "-CKS",      "-CKS,-CSC",
                                       "-CED",      "-CED,-CSC", "-CKS,-CED", "-CED,-CKS,-CSC"};
  return kNames[code];
}

Tensor contrastive_from_scores(const Tensor& anchors, const Tensor& candidates, double temperature,
                               const std::vector<std::uint8_t>& candidate_mask, const Tensor& positive_weight) {
  check_temperature(temperature);
  Tensor scores = ad::scale(ad::matmul(anchors, candidates, /*trans_b=*/true), 1.0 / temperature);
  Tensor log_probs = ad::masked_log_softmax(scores, candidate_mask);
  return ad::scale(ad::sum(ad::mul(log_probs, positive_weight)), -1.0);
}

Tensor ce_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(1) != data::kNumClasses || logits.dim(0) == 0) {
    throw ShapeError("ce_loss: logits must be [N>=1, 3], got " + ad::shape_str(logits.shape()));
  }
  const std::size_t n = logits.dim(0);
  check_labels(labels, n, "ce_loss");
  std::vector<double> onehot(n * data::kNumClasses, 0.0);
  for (std::size_t r = 0; r < n; ++r) onehot[r * data::kNumClasses + static_cast<std::size_t>(labels[r])] = 1.0;
  std::vector<std::uint8_t> all(logits.size(), 1);
  Tensor log_probs = ad::masked_log_softmax(logits, all);
  Tensor picked = ad::sum(ad::mul(log_probs, Tensor({n, data::kNumClasses}, std::move(onehot))));
  return ad::scale(picked, -1.0 / static_cast<double>(n));
}

Tensor csc_loss(const Tensor& h, const std::vector<int>& labels, double temperature) {
  return cks_loss(h, h, labels, temperature);
}

Tensor cks_loss(const Tensor& h_cks, const Tensor& h_current, const std::vector<int>& labels, double temperature) {
  if (h_cks.rank() != 2 || h_cks.shape() != h_current.shape()) {
    throw ShapeError("contrastive loss: views " + ad::shape_str(h_cks.shape()) + " and " +
                     ad::shape_str(h_current.shape()) + " differ");
  }
  const std::size_t n = h_cks.dim(0);
  if (n < 2) throw ShapeError("contrastive loss: needs at least 2 samples, got " + std::to_string(n));
  check_labels(labels, n, "contrastive loss");
  const Tensor anchors = ad::l2_normalize(h_cks);
  const Tensor candidates = h_cks.same_as(h_current) ? anchors : ad::l2_normalize(h_current);
  return contrastive_from_scores(anchors, candidates, temperature, off_diagonal(n), same_label_weights(labels));
}

Tensor ced_pair_loss(const Tensor& teacher, const Tensor& student, double temperature, Reduction reduction) {
  if (teacher.rank() != 2 || teacher.shape() != student.shape()) {
    throw ShapeError("ced_pair_loss: teacher " + ad::shape_str(teacher.shape()) + " vs student " +
                     ad::shape_str(student.shape()));
  }
  const std::size_t n = teacher.dim(0);
  const std::size_t width = teacher.dim(1);
  // Row 2n is teacher sample n, row 2n+1 the student's; partners differ in bit 0.
  Tensor rows = ad::reshape(ad::concat({teacher, student}, 1), {2 * n, width});
  std::vector<double> partner(4 * n * n, 0.0);
  for (std::size_t a = 0; a < 2 * n; ++a) partner[a * 2 * n + (a ^ 1U)] = 1.0;
  Tensor loss = contrastive_from_scores(rows, rows, temperature, off_diagonal(2 * n),
                                        Tensor({2 * n, 2 * n}, std::move(partner)));
  if (reduction == Reduction::kMean) loss = ad::scale(loss, 1.0 / static_cast<double>(2 * n));
  return loss;
}

Tensor ced_loss(const std::vector<Tensor>& view_logits, double temperature, bool teacher_grad, Reduction reduction) {
  if (view_logits.empty()) throw Error("ced_loss: needs at least the current view");
  const Tensor& student = view_logits.back();
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i + 1 < view_logits.size(); ++i) {
    const Tensor teacher = teacher_grad ? view_logits[i] : ad::detach(view_logits[i]);
    total = ad::add(total, ced_pair_loss(teacher, student, temperature, reduction));
  }
  return total;
}

nlohmann::json LossBreakdown::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"ce", ce}, {"csc", opt(csc)}, {"ced", opt(ced)}, {"cks", opt(cks)}, {"total", total}};
}

TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights) {
  check_finite(terms.ce, "ce");
  TotalLoss out;
  out.total = terms.ce;
  out.breakdown.ce = terms.ce.item();
  auto add_term = [&](const std::optional<Tensor>& term, double weight, const char* name, std::optional<double>& slot) {
    if (!term) return;
    check_finite(*term, name);
    slot = term->item();
    if (weight != 0.0) out.total = ad::add(out.total, ad::scale(*term, weight));
  };
  add_term(terms.csc, weights.csc, "csc", out.breakdown.csc);
  add_term(terms.ced, weights.ced, "ced", out.breakdown.ced);
  add_term(terms.cks, weights.cks, "cks", out.breakdown.cks);
  out.breakdown.total = out.total.item();
  return out;
}

}  // namespace classic::losses
