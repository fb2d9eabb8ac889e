#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tailmask/corruption.hpp"
#include "tailmask/metrics.hpp"
#include "tailmask/synth.hpp"
#include "tailmask/train.hpp"

namespace tailmask {

/// Where a split comes from: an annotation file, or the synthetic generator.
struct DataSource {
  std::optional<std::filesystem::path> annotations;
  SynthConfig synth;
};

/**
 * Everything one experiment needs. The global seed is fanned out to named
 * substreams before any sampling:
 *
 *   train data  derive_seed(seed, "data", 0)     test data  derive_seed(seed, "data", 1)
 *   init        derive_seed(seed, "init")        order      derive_seed(seed, "order")
 *   masks       derive_seed(seed, "masks")       features   derive_seed(seed, "features", 0|1)
 *   corruption  derive_seed(seed, "corruption", i) for the i-th corruption spec
 *
 * Substream seeds override the synthetic configs' own seed fields.
 */
struct ExperimentConfig {
  std::uint64_t seed = 7;
  DataSource train_data;
  DataSource test_data;
  TrainConfig train;
  EvalSpec eval;
  std::vector<CorruptionSpec> corruptions;

  /// Throws ConfigError.
  void validate() const;
};

ExperimentConfig default_experiment_config();

std::string experiment_config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected. Throws ConfigError.
ExperimentConfig experiment_config_from_json(std::string_view text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// TrainConfig with the substream seeds filled in from the global seed.
TrainConfig seeded_train_config(const ExperimentConfig& config);
DatasetAnnotations load_split(const ExperimentConfig& config, bool test_split);
std::uint64_t test_feature_seed(const ExperimentConfig& config);
std::vector<CorruptionSpec> seeded_corruptions(const ExperimentConfig& config);

/// Train on the train split.
TrainResult run_train(const ExperimentConfig& config);
/// Evaluate on the test split with the clean test features.
MetricTable run_eval(const ExperimentConfig& config, const ModelParams& params);
/// Robustness sweep on the test split.
SweepTable run_robust(const ExperimentConfig& config, const ModelParams& params);

}  // namespace tailmask
