#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tailmask/metrics.hpp"
#include "tailmask/model.hpp"

namespace tailmask {

enum class CorruptionKind {
  gaussian_noise,
  shot_noise,
  impulse_noise,
  speckle_noise,
  defocus_blur,
  brightness,
  contrast,
  saturate,
  pixelate,
};

inline constexpr std::array<CorruptionKind, 9> kAllCorruptions = {
    CorruptionKind::gaussian_noise, CorruptionKind::shot_noise, CorruptionKind::impulse_noise,
    CorruptionKind::speckle_noise,  CorruptionKind::defocus_blur, CorruptionKind::brightness,
    CorruptionKind::contrast,       CorruptionKind::saturate,   CorruptionKind::pixelate,
};

std::string_view to_string(CorruptionKind kind);
/// Throws ConfigError for an unknown name.
CorruptionKind parse_corruption(std::string_view name);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = 1;
  std::uint64_t seed = 0;
  /// Replaces the severity table entry when set.
  std::optional<double> parameter;

  void validate() const;
};

/**
 * Severity parameter tables (feature-space analogues of common image corruption scales).
 *
 *   gaussian_noise  sigma / range            0.04 0.06 0.08 0.09 0.10
 *   shot_noise      poisson rate             60   25   12   5    3
 *   impulse_noise   flipped fraction         0.01 0.02 0.03 0.05 0.07
 *   speckle_noise   multiplicative sigma     0.15 0.20 0.35 0.45 0.60
 *   defocus_blur    temporal window          2    3    4    5    6
 *   brightness      shift / range            0.1  0.2  0.3  0.4  0.5
 *   contrast        scale about the mean     0.75 0.6  0.5  0.4  0.3
 *   saturate        clip quantile            0.05 0.10 0.15 0.20 0.25
 *   pixelate        quantisation levels      32   16   12   8    6
 */
double severity_parameter(CorruptionKind kind, int severity);

/// Parameter value for which a corruption is the identity.
double identity_parameter(CorruptionKind kind);

/// Applies one corruption to every feature of the set. Deterministic given spec.seed.
FeatureSet corrupt_features(const FeatureSet& features, const CorruptionSpec& spec);

/// One row of a robustness sweep (clean rows use corruption "clean", severity 0).
struct SweepRow {
  std::string corruption;
  int severity = 0;
  Strategy strategy = Strategy::with_constraint;
  int k = 0;
  std::optional<double> recall;
  std::optional<double> mean_recall;
  /// Relative change of mR@K versus the clean row, in percent.
  std::optional<double> delta_vs_clean_percent;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  const SweepRow* find(std::string_view corruption, int severity, Strategy strategy, int k) const;
};

/// Clean evaluation plus one evaluation per spec; features are regenerated from
/// (feature_config, feature_seed) and corrupted before scoring.
SweepTable robustness_sweep(const ModelParams& params, const DatasetAnnotations& test_data,
                            const FeatureConfig& feature_config, std::uint64_t feature_seed,
                            std::span<const CorruptionSpec> specs, const EvalSpec& eval);

}  // namespace tailmask
