#include "tailmask/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tailmask/error.hpp"
#include "tailmask/rng.hpp"

namespace tailmask {
namespace {

struct LabelState {
  bool labeled = false;
  ClassId predicate = 0;
};

BoundingBox random_box(Rng& rng) {
  const double w = 0.1 + 0.3 * rng.uniform();
  const double h = 0.1 + 0.3 * rng.uniform();
  const double x0 = rng.uniform() * (1.0 - w);
  const double y0 = rng.uniform() * (1.0 - h);
  return {x0, y0, x0 + w, y0 + h};
}

BoundingBox drift(const BoundingBox& box, Rng& rng) {
  const double w = box.x1 - box.x0;
  const double h = box.y1 - box.y0;
  const double x0 = std::clamp(box.x0 + 0.02 * rng.normal(), 0.0, 1.0 - w);
  const double y0 = std::clamp(box.y0 + 0.02 * rng.normal(), 0.0, 1.0 - h);
  return {x0, y0, x0 + w, y0 + h};
}

void validate(const SynthConfig& config) {
  if (config.n_videos < 1 || config.frames_per_video < 1 || config.pairs_per_frame < 1) {
    throw ConfigError("synthetic dataset needs >= 1 video, frame and pair");
  }
  if (config.classes_per_category.empty()) throw ConfigError("need at least one predicate category");
  for (int n : config.classes_per_category) {
    if (n < 1) throw ConfigError("every predicate category needs >= 1 class");
  }
  if (!(config.zipf_exponent >= 0.0)) throw ConfigError("zipf exponent must be >= 0");
  if (!(config.label_rate > 0.0 && config.label_rate <= 1.0)) throw ConfigError("label rate must be in (0, 1]");
  if (!(config.label_persistence >= 0.0 && config.label_persistence <= 1.0)) {
    throw ConfigError("label persistence must be in [0, 1]");
  }
}

}  // namespace

std::vector<double> zipf_probabilities(int n, double exponent) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    p[static_cast<std::size_t>(k)] = std::pow(static_cast<double>(k + 1), -exponent);
    total += p[static_cast<std::size_t>(k)];
  }
  for (auto& v : p) v /= total;
  return p;
}

DatasetAnnotations synth_longtail_dataset(const SynthConfig& config) {
  validate(config);
  DatasetAnnotations data;
  data.ontology = PredicateOntology::with_counts(config.classes_per_category, config.num_object_categories);
  const auto& ontology = data.ontology;
  const std::size_t num_categories = ontology.num_categories();

  std::vector<std::vector<double>> cumulative;
  for (std::size_t c = 0; c < num_categories; ++c) {
    cumulative.push_back(cumulative_weights(
        zipf_probabilities(static_cast<int>(ontology.category_classes(c).size()), config.zipf_exponent)));
  }

  const auto pairs = static_cast<std::size_t>(config.pairs_per_frame);
  for (int v = 0; v < config.n_videos; ++v) {
    Rng rng(derive_seed(config.seed, "synth-video", static_cast<std::uint64_t>(v)));
    char id[32];
    std::snprintf(id, sizeof id, "v%04d", v);
    VideoAnnotations video{id, {}};

    std::vector<ObjectInstance> objects;
    objects.push_back({0, 0, random_box(rng)});
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto category = 1 + static_cast<int>(rng.uniform_index(
                                    static_cast<std::uint64_t>(config.num_object_categories - 1)));
      objects.push_back({static_cast<ObjectId>(p + 1), category, random_box(rng)});
    }

    std::vector<std::vector<LabelState>> state(pairs, std::vector<LabelState>(num_categories));
    auto draw = [&](std::size_t c) {
      LabelState s;
      s.labeled = rng.uniform() < config.label_rate;
      const std::size_t rank = rng.categorical(cumulative[c]);
      s.predicate = ontology.category_classes(c)[rank];
      return s;
    };

    for (int f = 0; f < config.frames_per_video; ++f) {
      FrameAnnotations frame;
      frame.frame_index = f;
      if (f > 0) {
        for (auto& object : objects) object.box = drift(object.box, rng);
      }
      frame.objects = objects;
      for (std::size_t p = 0; p < pairs; ++p) {
        for (std::size_t c = 0; c < num_categories; ++c) {
          if (f == 0 || !(rng.uniform() < config.label_persistence)) state[p][c] = draw(c);
          if (!state[p][c].labeled) continue;
          RelationInstance relation;
          relation.subject_id = 0;
          relation.object_id = static_cast<ObjectId>(p + 1);
          relation.predicate_id = state[p][c].predicate;
          relation.slot = static_cast<int>(frame.relations.size());
          frame.relations.push_back(relation);
        }
      }
      video.frames.push_back(std::move(frame));
    }
    data.videos.push_back(std::move(video));
  }
  return data;
}

}  // namespace tailmask
