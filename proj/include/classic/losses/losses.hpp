#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "classic/autodiff/tensor.hpp"

namespace classic::losses {

using ad::Tensor;

struct LossWeights {
  double csc = 1.0;  // lambda_1
  double ced = 1.0;  // lambda_2
  double cks = 1.0;  // lambda_3
  double temperature = 1.0;
};

/// Removes a component entirely (not computed, absent from the breakdown).
struct Ablation {
  bool no_csc = false;
  bool no_ced = false;
  bool no_cks = false;

  /// "full" or the flag-set name used in reports ("-CED", "-CKS,-CED", ...).
  std::string label() const;
  bool any() const { return no_csc || no_ced || no_cks; }
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

/// How the CED pair loss combines its 2N anchor terms.
enum class Reduction { kSum, kMean };

/// Mean over rows of -log softmax(logits)[label]. Labels must be in {0,1,2}.
Tensor ce_loss(const Tensor& logits, const std::vector<int>& labels);

/// Supervised contrastive loss on l2-normalised rows of h [N, d]. Anchors whose
/// class is a singleton in the batch contribute 0. Needs N >= 2.
Tensor csc_loss(const Tensor& h, const std::vector<int>& labels, double temperature);

/// Contrastive distillation between teacher and student logits [N, C]: the 2N
/// rows are interleaved (teacher n, student n), each row's positive is its
/// partner and its denominator runs over the other 2N - 1 rows.
Tensor ced_pair_loss(const Tensor& teacher, const Tensor& student, double temperature,
                     Reduction reduction = Reduction::kSum);

/// Sum of ced_pair_loss(logits[i], logits.back()) over every earlier view.
/// Zero for a single view. Teachers are detached unless teacher_grad.
Tensor ced_loss(const std::vector<Tensor>& view_logits, double temperature, bool teacher_grad,
                Reduction reduction = Reduction::kSum);

/// Like csc_loss, but anchors are rows of h_cks and candidates rows of
/// h_current (both l2-normalised).
Tensor cks_loss(const Tensor& h_cks, const Tensor& h_current, const std::vector<int>& labels, double temperature);

/// Weighted supervised-contrastive core shared by CSC, CKS and CED:
/// -sum_{a,c} weight[a,c] * log_softmax_{c' in candidates[a]}(anchors . candidates^T / tau)[a,c].
Tensor contrastive_from_scores(const Tensor& anchors, const Tensor& candidates, double temperature,
                               const std::vector<std::uint8_t>& candidate_mask, const Tensor& positive_weight);

struct LossTerms {
  Tensor ce;
  std::optional<Tensor> csc;
  std::optional<Tensor> ced;
  std::optional<Tensor> cks;
};

struct LossBreakdown {
  double ce = 0.0;
  std::optional<double> csc;
  std::optional<double> ced;
  std::optional<double> cks;
  double total = 0.0;

  nlohmann::json to_json() const;
};

struct TotalLoss {
  Tensor total;
  LossBreakdown breakdown;
};

/// total = ce + l1 csc + l2 ced + l3 cks over the present terms; a zero weight
/// leaves its term out of the sum. Throws NumericError naming a non-finite term.
TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace classic::losses
