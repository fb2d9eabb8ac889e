#include "tailmask/graphbuild.hpp"

#include <algorithm>
#include <cmath>

#include "tailmask/error.hpp"
#include "tailmask/loss.hpp"

namespace tailmask {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::with_constraint: return "with";
    case Strategy::no_constraint: return "no";
    case Strategy::semi_constraint: return "semi";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "with" || name == "with_constraint") return Strategy::with_constraint;
  if (name == "no" || name == "no_constraint") return Strategy::no_constraint;
  if (name == "semi" || name == "semi_constraint") return Strategy::semi_constraint;
  throw ConfigError("unknown graph strategy '" + std::string(name) + "'");
}

SemiConstraintThresholds SemiConstraintThresholds::uniform(std::size_t num_classes, double value) {
  return {std::vector<double>(num_classes, value)};
}

std::vector<double> category_confidences(std::span<const double> scores, const PredicateOntology& ontology) {
  if (scores.size() != ontology.num_predicates()) {
    throw DomainError("score vector has " + std::to_string(scores.size()) + " entries, ontology has " +
                      std::to_string(ontology.num_predicates()) + " classes");
  }
  std::vector<double> out(scores.size());
  std::vector<double> buffer;
  for (std::size_t c = 0; c < ontology.num_categories(); ++c) {
    const auto ids = ontology.category_classes(c);
    buffer.clear();
    for (ClassId id : ids) buffer.push_back(scores[static_cast<std::size_t>(id)]);
    const auto probs = softmax(buffer);
    for (std::size_t i = 0; i < ids.size(); ++i) out[static_cast<std::size_t>(ids[i])] = probs[i];
  }
  return out;
}

namespace {

// Candidates are generated in (pair, predicate) order; a stable sort keeps that order on ties.
SceneGraph finish(int frame_index, std::vector<Triplet> triplets) {
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& a, const Triplet& b) { return a.confidence > b.confidence; });
  return {frame_index, std::move(triplets)};
}

}  // namespace

SceneGraph assemble_with_constraint(int frame_index, std::span<const PairScores> pairs,
                                    const PredicateOntology& ontology) {
  std::vector<Triplet> triplets;
  for (const auto& pair : pairs) {
    const auto confidences = category_confidences(pair.scores, ontology);
    for (std::size_t c = 0; c < ontology.num_categories(); ++c) {
      const auto ids = ontology.category_classes(c);
      ClassId best = ids.front();
      for (ClassId id : ids) {
        // Strict comparison on raw scores: ties resolve to the lowest class id.
        if (pair.scores[static_cast<std::size_t>(id)] > pair.scores[static_cast<std::size_t>(best)]) best = id;
      }
      triplets.push_back({pair.subject_id, pair.object_id, best, confidences[static_cast<std::size_t>(best)]});
    }
  }
  // Within a pair the emitted order is by category, which is also ascending class id.
  return finish(frame_index, std::move(triplets));
}

SceneGraph assemble_no_constraint(int frame_index, std::span<const PairScores> pairs,
                                  const PredicateOntology& ontology) {
  std::vector<Triplet> triplets;
  for (const auto& pair : pairs) {
    const auto confidences = category_confidences(pair.scores, ontology);
    for (std::size_t k = 0; k < confidences.size(); ++k) {
      triplets.push_back({pair.subject_id, pair.object_id, static_cast<ClassId>(k), confidences[k]});
    }
  }
  return finish(frame_index, std::move(triplets));
}

SceneGraph assemble_semi_constraint(int frame_index, std::span<const PairScores> pairs,
                                    const PredicateOntology& ontology,
                                    const SemiConstraintThresholds& thresholds) {
  if (thresholds.theta.size() != ontology.num_predicates()) {
    throw ConfigError("semi-constraint thresholds must cover every predicate class");
  }
  auto graph = assemble_no_constraint(frame_index, pairs, ontology);
  std::erase_if(graph.triplets, [&](const Triplet& t) {
    return !(t.confidence > thresholds.theta[static_cast<std::size_t>(t.predicate_id)]);
  });
  return graph;
}

SceneGraph assemble(Strategy strategy, int frame_index, std::span<const PairScores> pairs,
                    const PredicateOntology& ontology, const SemiConstraintThresholds& thresholds) {
  switch (strategy) {
    case Strategy::with_constraint: return assemble_with_constraint(frame_index, pairs, ontology);
    case Strategy::no_constraint: return assemble_no_constraint(frame_index, pairs, ontology);
    case Strategy::semi_constraint: return assemble_semi_constraint(frame_index, pairs, ontology, thresholds);
  }
  throw ConfigError("unknown strategy");
}

}  // namespace tailmask
