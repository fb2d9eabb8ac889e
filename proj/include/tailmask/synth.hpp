#pragma once

#include <cstdint>
#include <vector>

#include "tailmask/core_data.hpp"

namespace tailmask {

/// Parameters of the synthetic long-tailed video generator.
struct SynthConfig {
  int n_videos = 5;
  int frames_per_video = 10;
  int pairs_per_frame = 4;
  double zipf_exponent = 1.5;
  std::vector<int> classes_per_category{3, 6, 17};
  /// Probability that a pair carries a label in a given category.
  double label_rate = 1.0;
  /// Probability that a pair keeps its previous frame's label state in a category.
  double label_persistence = 0.0;
  int num_object_categories = 6;
  std::uint64_t seed = 0;
};

/**
 * Generates videos whose per-category predicate labels follow a Zipf law over
 * class rank (rank 1 = lowest class id of the category).
 *
 * Every video has one subject (object id 0, category 0) interacting with
 * `pairs_per_frame` objects that persist through the video with slowly
 * drifting boxes. Each labelled (pair, category) carries exactly one label.
 * Deterministic given the config.
 */
DatasetAnnotations synth_longtail_dataset(const SynthConfig& config);

/// Zipf(s) probabilities over ranks 1..n.
std::vector<double> zipf_probabilities(int n, double exponent);

}  // namespace tailmask
