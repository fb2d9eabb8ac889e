#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "tailmask/core_data.hpp"

namespace tailmask {

struct Triplet {
  ObjectId subject_id = 0;
  ObjectId object_id = 0;
  ClassId predicate_id = 0;
  double confidence = 0.0;
  bool operator==(const Triplet&) const = default;
};

/// Raw predicate scores of one object pair.
struct PairScores {
  ObjectId subject_id = 0;
  ObjectId object_id = 0;
  std::vector<double> scores;
};

/// Triplets sorted by descending confidence; ties keep (pair, predicate) order.
struct SceneGraph {
  int frame_index = 0;
  std::vector<Triplet> triplets;
  bool operator==(const SceneGraph&) const = default;
};

enum class Strategy { with_constraint, no_constraint, semi_constraint };

std::string_view to_string(Strategy strategy);
/// Accepts "with", "no", "semi" and the full enumerator names. Throws ConfigError.
Strategy parse_strategy(std::string_view name);

/// Per-class thresholds for the semi-constraint strategy (default 0.5).
struct SemiConstraintThresholds {
  std::vector<double> theta;

  static SemiConstraintThresholds uniform(std::size_t num_classes, double value = 0.5);
};

/// Per-pair, per-category softmax of raw scores.
std::vector<double> category_confidences(std::span<const double> scores, const PredicateOntology& ontology);

/// One triplet per (pair, category): the category's argmax class (ties -> lowest id).
SceneGraph assemble_with_constraint(int frame_index, std::span<const PairScores> pairs,
                                    const PredicateOntology& ontology);

/// Every (pair, class) triplet.
SceneGraph assemble_no_constraint(int frame_index, std::span<const PairScores> pairs,
                                  const PredicateOntology& ontology);

/// (pair, class) triplets with confidence strictly above theta[class].
SceneGraph assemble_semi_constraint(int frame_index, std::span<const PairScores> pairs,
                                    const PredicateOntology& ontology,
                                    const SemiConstraintThresholds& thresholds);

SceneGraph assemble(Strategy strategy, int frame_index, std::span<const PairScores> pairs,
                    const PredicateOntology& ontology, const SemiConstraintThresholds& thresholds);

}  // namespace tailmask
