#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tailmask {

/// A loss value and its (sub)gradient with respect to the loss input.
struct ValueGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/**
 * Multi-label margin loss over raw predicate scores:
 *
 *   L = sum_{u in P+} sum_{v notin P+} max(0, 1 - s[u] + s[v])
 *
 * The subgradient at the hinge kink is 0. Throws DomainError when `positives`
 * is empty or out of range.
 */
ValueGrad multilabel_margin_with_grad(std::span<const double> scores, std::span<const int> positives);

/**
 * Margin loss with per-label masks: the hinge terms of positive u are dropped
 * when mask_bits[u's position] == 1. Negatives stay the complement of the full
 * positive set, so a masked positive never acts as a negative and its score
 * receives an exactly zero gradient. All positives masked gives (0, zeros).
 */
ValueGrad masked_predicate_loss(std::span<const double> scores, std::span<const int> positives,
                                std::span<const std::uint8_t> mask_bits);

/// -log p[label] with p clipped below at 1e-12; grad = p - onehot(label) w.r.t. the logits.
ValueGrad cross_entropy_with_grad(std::span<const double> probs, int label);

/// Softmax cross-entropy from logits (log-sum-exp); grad = softmax(logits) - onehot(label).
ValueGrad cross_entropy_logits_with_grad(std::span<const double> logits, int label);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Sum of elementwise Huber(a - b) with transition at |d| = 1; grad w.r.t. a.
ValueGrad smooth_l1_with_grad(std::span<const double> a, std::span<const double> b);

/// lambda_1..lambda_5 of the composite objectives.
struct LossWeights {
  double gen = 1.0;    // observed predicate classification
  double obj = 1.0;    // object classification
  double ant = 1.0;    // anticipated predicate classification
  double boxes = 1.0;  // box regression
  double recon = 1.0;  // representation reconstruction

  void validate() const;
};

/// Loss terms of one frame: one entry per pair (predicate) and per object term.
struct FrameTerms {
  std::vector<ValueGrad> predicate;
  std::vector<ValueGrad> object;
};

/// Anticipation terms for one cutoff T (1-based number of observed frames).
/// Each entry is one (future frame, pair) item.
struct CutoffTerms {
  int cutoff = 0;
  std::vector<ValueGrad> ant;
  std::vector<ValueGrad> boxes;
  std::vector<ValueGrad> recon;
};

/**
 * Result of a composite objective.
 *
 * Term values are unweighted sums; `total` is the lambda-weighted sum. Each
 * gradient list mirrors its input list (same order, same dimensions) and is
 * already scaled by the term's lambda.
 */
struct LossBreakdown {
  double gen = 0.0, obj = 0.0, ant = 0.0, boxes = 0.0, recon = 0.0;
  double total = 0.0;

  std::vector<std::vector<double>> gen_grads, obj_grads, ant_grads, box_grads, recon_grads;

  double weighted_total(const LossWeights& weights) const;
};

/// L = sum_t (l1 * gen^t + l2 * sum_i obj^t_i).
LossBreakdown vidsgg_objective(std::span<const FrameTerms> frames, const LossWeights& weights);

/**
 * Observed terms as in vidsgg_objective plus, for every cutoff
 * T in [3, num_frames - 1], l3 * ant + l4 * boxes + l5 * recon.
 * Throws DomainError for a cutoff outside that range.
 */
LossBreakdown sga_objective(std::span<const FrameTerms> observed, std::span<const CutoffTerms> cutoffs,
                            int num_frames, const LossWeights& weights);

/// One anticipation window: frames (1-based) T+1 .. min(T+H, num_frames) for cutoff T.
struct AnticipationWindow {
  int cutoff = 0;
  std::vector<int> targets;
};

/// Windows for T = 3 .. num_frames - 1; empty when num_frames < 4.
std::vector<AnticipationWindow> anticipation_windows(int num_frames, int horizon);

}  // namespace tailmask
