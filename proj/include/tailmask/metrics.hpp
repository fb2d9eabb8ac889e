#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tailmask/core_data.hpp"
#include "tailmask/graphbuild.hpp"

namespace tailmask {

enum class Matching { pair_identity, iou };

struct EvalSpec {
  std::vector<int> ks{10, 20, 50};
  std::vector<Strategy> strategies{Strategy::with_constraint, Strategy::no_constraint,
                                   Strategy::semi_constraint};
  Matching matching = Matching::pair_identity;
  double iou_threshold = 0.5;
  double semi_threshold = 0.5;
  /// When set, evaluate anticipated graphs for the frames after this observed fraction.
  std::optional<double> observed_fraction;

  /// Throws ConfigError for unsorted / non-positive K or a fraction outside (0, 1).
  void validate() const;
};

/// Observed-fraction presets used for anticipation tables.
inline constexpr double kObservedFractions[] = {0.3, 0.5, 0.7, 0.9};

double iou(const BoundingBox& a, const BoundingBox& b);

/**
 * Greedy one-to-one matching in prediction-rank order.
 *
 * `predicted_objects` supplies boxes and categories of the predicted subject and
 * object ids (only used in IoU mode). Returns, for every gt relation (slot
 * order), whether it was matched.
 */
std::vector<bool> match_triplets(std::span<const Triplet> predictions,
                                 std::span<const ObjectInstance> predicted_objects,
                                 const FrameAnnotations& gt, const EvalSpec& spec);

/// Mean over frames with >= 1 gt triplet of matched-in-top-K / |gt|; absent when no such frame.
std::vector<std::optional<double>> recall_at_k(std::span<const SceneGraph> graphs,
                                               std::span<const FrameAnnotations> gt,
                                               const EvalSpec& spec);

struct MeanRecall {
  std::optional<double> mean;
  /// Pooled per-class recall; absent for classes without gt.
  std::vector<std::optional<double>> per_class;
};

/// Per-K mean of pooled per-class recalls over classes present in gt.
std::vector<MeanRecall> mean_recall_at_k(std::span<const SceneGraph> graphs,
                                         std::span<const FrameAnnotations> gt, std::size_t num_classes,
                                         const EvalSpec& spec);

struct MetricRow {
  Strategy strategy = Strategy::with_constraint;
  int k = 0;
  std::optional<double> recall;
  std::optional<double> mean_recall;
  std::vector<std::optional<double>> per_class;
};

struct MetricTable {
  std::vector<MetricRow> rows;

  const MetricRow* find(Strategy strategy, int k) const;
};

/// One frame's scored pairs together with its ground truth.
struct ScoredFrame {
  std::vector<PairScores> pairs;
  FrameAnnotations ground_truth;
};

/// Assembles graphs for every strategy in `spec` and evaluates R@K / mR@K.
MetricTable evaluate_frames(std::span<const ScoredFrame> frames, const PredicateOntology& ontology,
                            const EvalSpec& spec);

}  // namespace tailmask
