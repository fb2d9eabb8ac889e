#include "tailmask/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tailmask/error.hpp"

namespace tailmask {
namespace {

constexpr double kProbFloor = 1e-12;

std::vector<char> positive_flags(std::size_t n, std::span<const int> positives) {
  if (positives.empty()) throw DomainError("multi-label margin loss needs at least one positive class");
  std::vector<char> flags(n, 0);
  for (int u : positives) {
    if (u < 0 || static_cast<std::size_t>(u) >= n) {
      throw DomainError("positive class " + std::to_string(u) + " outside [0, " + std::to_string(n) + ")");
    }
    flags[static_cast<std::size_t>(u)] = 1;
  }
  return flags;
}

// Hinge terms of a single positive u against every negative; accumulates into `out`.
void add_positive_terms(std::span<const double> scores, const std::vector<char>& is_positive, int u,
                        ValueGrad& out) {
  const auto su = static_cast<std::size_t>(u);
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (is_positive[v]) continue;
    const double margin = 1.0 - scores[su] + scores[v];
    if (margin > 0.0) {
      out.value += margin;
      out.grad[su] -= 1.0;
      out.grad[v] += 1.0;
    }
  }
}

}  // namespace

ValueGrad multilabel_margin_with_grad(std::span<const double> scores, std::span<const int> positives) {
  const auto is_positive = positive_flags(scores.size(), positives);
  ValueGrad out{0.0, std::vector<double>(scores.size(), 0.0)};
  // Repeated ids count once, as in a set.
  std::vector<char> done(scores.size(), 0);
  for (int u : positives) {
    if (done[static_cast<std::size_t>(u)]) continue;
    done[static_cast<std::size_t>(u)] = 1;
    add_positive_terms(scores, is_positive, u, out);
  }
  return out;
}

ValueGrad masked_predicate_loss(std::span<const double> scores, std::span<const int> positives,
                                std::span<const std::uint8_t> mask_bits) {
  if (mask_bits.size() != positives.size()) {
    throw ConsistencyError("mask has " + std::to_string(mask_bits.size()) + " bits for " +
                           std::to_string(positives.size()) + " positive labels");
  }
  const auto is_positive = positive_flags(scores.size(), positives);
  ValueGrad out{0.0, std::vector<double>(scores.size(), 0.0)};
  std::vector<char> done(scores.size(), 0);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const int u = positives[i];
    if (mask_bits[i] != 0 || done[static_cast<std::size_t>(u)]) continue;
    done[static_cast<std::size_t>(u)] = 1;
    add_positive_terms(scores, is_positive, u, out);
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

ValueGrad cross_entropy_with_grad(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw DomainError("label " + std::to_string(label) + " out of range");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("probabilities must sum to 1");
  ValueGrad out{-std::log(std::max(probs[static_cast<std::size_t>(label)], kProbFloor)),
                std::vector<double>(probs.begin(), probs.end())};
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

ValueGrad cross_entropy_logits_with_grad(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw DomainError("label " + std::to_string(label) + " out of range");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - top);
  const double log_normalizer = top + std::log(total);
  ValueGrad out{log_normalizer - logits[static_cast<std::size_t>(label)], softmax(logits)};
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

ValueGrad smooth_l1_with_grad(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DomainError("smooth L1 inputs have lengths " + std::to_string(a.size()) + " and " +
                      std::to_string(b.size()));
  }
  ValueGrad out{0.0, std::vector<double>(a.size(), 0.0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    const double ad = std::abs(d);
    if (ad < 1.0) {
      out.value += 0.5 * d * d;
      out.grad[i] = d;
    } else {
      out.value += ad - 0.5;
      out.grad[i] = d > 0.0 ? 1.0 : -1.0;
    }
  }
  return out;
}

void LossWeights::validate() const {
  for (double w : {gen, obj, ant, boxes, recon}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
  }
}

double LossBreakdown::weighted_total(const LossWeights& w) const {
  return w.gen * gen + w.obj * obj + w.ant * ant + w.boxes * boxes + w.recon * recon;
}

namespace {

std::vector<double> scaled(const std::vector<double>& grad, double weight) {
  std::vector<double> out(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = weight * grad[i];
  return out;
}

void accumulate(std::span<const ValueGrad> terms, double weight, double& sum,
                std::vector<std::vector<double>>& grads) {
  for (const auto& term : terms) {
    sum += term.value;
    grads.push_back(scaled(term.grad, weight));
  }
}

void add_observed(std::span<const FrameTerms> frames, const LossWeights& weights, LossBreakdown& out) {
  for (const auto& frame : frames) {
    accumulate(frame.predicate, weights.gen, out.gen, out.gen_grads);
    accumulate(frame.object, weights.obj, out.obj, out.obj_grads);
  }
}

}  // namespace

LossBreakdown vidsgg_objective(std::span<const FrameTerms> frames, const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  add_observed(frames, weights, out);
  out.total = out.weighted_total(weights);
  return out;
}

LossBreakdown sga_objective(std::span<const FrameTerms> observed, std::span<const CutoffTerms> cutoffs,
                            int num_frames, const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  add_observed(observed, weights, out);
  for (const auto& cutoff : cutoffs) {
    if (cutoff.cutoff < 3 || cutoff.cutoff > num_frames - 1) {
      throw DomainError("anticipation cutoff " + std::to_string(cutoff.cutoff) + " outside [3, " +
                        std::to_string(num_frames - 1) + "]");
    }
    accumulate(cutoff.ant, weights.ant, out.ant, out.ant_grads);
    accumulate(cutoff.boxes, weights.boxes, out.boxes, out.box_grads);
    accumulate(cutoff.recon, weights.recon, out.recon, out.recon_grads);
  }
  out.total = out.weighted_total(weights);
  return out;
}

std::vector<AnticipationWindow> anticipation_windows(int num_frames, int horizon) {
  std::vector<AnticipationWindow> out;
  for (int cutoff = 3; cutoff <= num_frames - 1; ++cutoff) {
    AnticipationWindow window{cutoff, {}};
    for (int t = cutoff + 1; t <= std::min(cutoff + horizon, num_frames); ++t) window.targets.push_back(t);
    out.push_back(std::move(window));
  }
  return out;
}

}  // namespace tailmask
