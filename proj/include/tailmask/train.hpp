#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tailmask/core_data.hpp"
#include "tailmask/loss.hpp"
#include "tailmask/maskgen.hpp"
#include "tailmask/metrics.hpp"
#include "tailmask/model.hpp"

namespace tailmask {

enum class TrainMode { vidsgg, sga };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::vidsgg;
  int epochs = 5;
  double learning_rate = 0.01;
  /// Per-step gradients with a global L2 norm above this are rescaled to it; 0 disables.
  double clip_norm = 5.0;
  LossWeights weights;
  MaskSchedule schedule = MaskSchedule::fixed(0.0);
  MaskGenOptions mask_options;
  /// When false no masks are generated and every label contributes (conventional training).
  bool masking_enabled = true;
  int horizon = 3;
  std::size_t hidden = 64;
  FeatureConfig features;

  /// Substream seeds.
  std::uint64_t init_seed = 1;
  std::uint64_t order_seed = 2;
  std::uint64_t mask_seed = 3;
  std::uint64_t feature_seed = 4;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mask_ratio = 0.0;
  std::size_t masked_labels = 0;
  double gen = 0.0, obj = 0.0, ant = 0.0, boxes = 0.0, recon = 0.0;
  double total = 0.0;
};

struct TrainReport {
  TrainMode mode = TrainMode::vidsgg;
  std::vector<EpochRecord> epochs;
  std::size_t skipped_videos = 0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// SGD on the masked generation objective, one step per video.
TrainResult train_vidsgg(const DatasetAnnotations& data, const TrainConfig& config);

/// SGD on the masked anticipation objective; videos with fewer than 4 frames are skipped.
TrainResult train_sga(const DatasetAnnotations& data, const TrainConfig& config);

/// Dispatches on config.mode.
TrainResult train(const DatasetAnnotations& data, const TrainConfig& config);

/// Observed-head scores for every annotated frame.
std::vector<ScoredFrame> score_observed(const ModelParams& params, const DatasetAnnotations& data,
                                        const FeatureSet& features);

/**
 * Anticipated scores: per video, the first max(1, floor(fraction * T)) frames
 * are observed and every later frame is predicted from the last observed
 * feature of each pair (pairs are assumed to persist).
 */
std::vector<ScoredFrame> score_anticipated(const ModelParams& params, const DatasetAnnotations& data,
                                           const FeatureSet& features, double observed_fraction);

/// score_observed / score_anticipated (per spec.observed_fraction) followed by evaluate_frames.
MetricTable evaluate_model(const ModelParams& params, const DatasetAnnotations& data,
                           const FeatureSet& features, const EvalSpec& spec);

}  // namespace tailmask
