#include "tailmask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tailmask/error.hpp"

namespace tailmask {

void EvalSpec::validate() const {
  if (ks.empty()) throw ConfigError("need at least one K");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] <= 0) throw ConfigError("K values must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw ConfigError("K values must be strictly increasing");
  }
  if (strategies.empty()) throw ConfigError("need at least one graph strategy");
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw ConfigError("IoU threshold must be in [0, 1]");
  if (observed_fraction && !(*observed_fraction > 0.0 && *observed_fraction < 1.0)) {
    throw ConfigError("observed fraction must be in (0, 1)");
  }
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

const ObjectInstance* find_in(std::span<const ObjectInstance> objects, ObjectId id) {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

bool matches(const Triplet& prediction, std::span<const ObjectInstance> predicted_objects,
             const RelationInstance& gt, const FrameAnnotations& gt_frame, const EvalSpec& spec) {
  if (prediction.predicate_id != gt.predicate_id) return false;
  if (spec.matching == Matching::pair_identity) {
    return prediction.subject_id == gt.subject_id && prediction.object_id == gt.object_id;
  }
  const auto* ps = find_in(predicted_objects, prediction.subject_id);
  const auto* po = find_in(predicted_objects, prediction.object_id);
  const auto* gs = gt_frame.find_object(gt.subject_id);
  const auto* go = gt_frame.find_object(gt.object_id);
  if (!ps || !po || !gs || !go) return false;
  return ps->category == gs->category && po->category == go->category &&
         iou(ps->box, gs->box) >= spec.iou_threshold && iou(po->box, go->box) >= spec.iou_threshold;
}

// For every gt relation, the rank of the prediction it is greedily matched to (-1 if none)
// among the first `limit` predictions. Greedy matching is prefix-consistent, so the
// top-K matching for K <= limit is {gt : rank < K}.
std::vector<long> match_ranks(std::span<const Triplet> predictions, std::span<const ObjectInstance> predicted_objects,
                              const FrameAnnotations& gt, const EvalSpec& spec, std::size_t limit) {
  std::vector<long> rank(gt.relations.size(), -1);
  const std::size_t n = std::min(limit, predictions.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t g = 0; g < gt.relations.size(); ++g) {
      if (rank[g] >= 0) continue;
      if (matches(predictions[r], predicted_objects, gt.relations[g], gt, spec)) {
        rank[g] = static_cast<long>(r);
        break;
      }
    }
  }
  return rank;
}

void check_aligned(std::span<const SceneGraph> graphs, std::span<const FrameAnnotations> gt) {
  if (graphs.size() != gt.size()) {
    throw ConsistencyError(std::to_string(graphs.size()) + " scene graphs for " + std::to_string(gt.size()) +
                           " ground-truth frames");
  }
}

}  // namespace

std::vector<bool> match_triplets(std::span<const Triplet> predictions,
                                 std::span<const ObjectInstance> predicted_objects, const FrameAnnotations& gt,
                                 const EvalSpec& spec) {
  const auto rank = match_ranks(predictions, predicted_objects, gt, spec, predictions.size());
  std::vector<bool> out(rank.size());
  for (std::size_t g = 0; g < rank.size(); ++g) out[g] = rank[g] >= 0;
  return out;
}

std::vector<std::optional<double>> recall_at_k(std::span<const SceneGraph> graphs,
                                               std::span<const FrameAnnotations> gt, const EvalSpec& spec) {
  check_aligned(graphs, gt);
  const auto max_k = static_cast<std::size_t>(spec.ks.back());
  std::vector<double> sums(spec.ks.size(), 0.0);
  std::size_t frames = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    if (gt[f].relations.empty()) continue;
    ++frames;
    const auto rank = match_ranks(graphs[f].triplets, gt[f].objects, gt[f], spec, max_k);
    for (std::size_t i = 0; i < spec.ks.size(); ++i) {
      std::size_t hit = 0;
      for (long r : rank) hit += (r >= 0 && r < spec.ks[i]) ? 1 : 0;
      sums[i] += static_cast<double>(hit) / static_cast<double>(gt[f].relations.size());
    }
  }
  std::vector<std::optional<double>> out(spec.ks.size());
  if (frames == 0) return out;
  for (std::size_t i = 0; i < spec.ks.size(); ++i) out[i] = sums[i] / static_cast<double>(frames);
  return out;
}

std::vector<MeanRecall> mean_recall_at_k(std::span<const SceneGraph> graphs, std::span<const FrameAnnotations> gt,
                                         std::size_t num_classes, const EvalSpec& spec) {
  check_aligned(graphs, gt);
  const auto max_k = static_cast<std::size_t>(spec.ks.back());
  std::vector<std::int64_t> totals(num_classes, 0);
  std::vector<std::vector<std::int64_t>> hits(spec.ks.size(), std::vector<std::int64_t>(num_classes, 0));
  for (std::size_t f = 0; f < gt.size(); ++f) {
    if (gt[f].relations.empty()) continue;
    const auto rank = match_ranks(graphs[f].triplets, gt[f].objects, gt[f], spec, max_k);
    for (std::size_t g = 0; g < rank.size(); ++g) {
      const auto k = static_cast<std::size_t>(gt[f].relations[g].predicate_id);
      if (k >= num_classes) throw ConsistencyError("ground-truth predicate outside the ontology");
      ++totals[k];
      for (std::size_t i = 0; i < spec.ks.size(); ++i) {
        if (rank[g] >= 0 && rank[g] < spec.ks[i]) ++hits[i][k];
      }
    }
  }
  std::vector<MeanRecall> out(spec.ks.size());
  for (std::size_t i = 0; i < spec.ks.size(); ++i) {
    out[i].per_class.resize(num_classes);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      if (totals[k] == 0) continue;
      const double r = static_cast<double>(hits[i][k]) / static_cast<double>(totals[k]);
      out[i].per_class[k] = r;
      sum += r;
      ++present;
    }
    if (present > 0) out[i].mean = sum / static_cast<double>(present);
  }
  return out;
}

const MetricRow* MetricTable::find(Strategy strategy, int k) const {
  for (const auto& row : rows) {
    if (row.strategy == strategy && row.k == k) return &row;
  }
  return nullptr;
}

MetricTable evaluate_frames(std::span<const ScoredFrame> frames, const PredicateOntology& ontology,
                            const EvalSpec& spec) {
  spec.validate();
  const auto thresholds = SemiConstraintThresholds::uniform(ontology.num_predicates(), spec.semi_threshold);
  std::vector<FrameAnnotations> gt;
  gt.reserve(frames.size());
  for (const auto& frame : frames) gt.push_back(frame.ground_truth);

  MetricTable table;
  for (Strategy strategy : spec.strategies) {
    std::vector<SceneGraph> graphs;
    graphs.reserve(frames.size());
    for (const auto& frame : frames) {
      graphs.push_back(assemble(strategy, frame.ground_truth.frame_index, frame.pairs, ontology, thresholds));
    }
    const auto recall = recall_at_k(graphs, gt, spec);
    const auto mean = mean_recall_at_k(graphs, gt, ontology.num_predicates(), spec);
    for (std::size_t i = 0; i < spec.ks.size(); ++i) {
      table.rows.push_back({strategy, spec.ks[i], recall[i], mean[i].mean, mean[i].per_class});
    }
  }
  return table;
}

}  // namespace tailmask
