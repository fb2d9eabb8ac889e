#include "tailmask/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tailmask/error.hpp"
#include "tailmask/rng.hpp"
#include "tailmask/train.hpp"

namespace tailmask {

namespace {

constexpr std::array<std::string_view, 9> kNames = {
    "gaussian_noise", "shot_noise", "impulse_noise", "speckle_noise", "defocus_blur",
    "brightness",     "contrast",   "saturate",      "pixelate",
};

constexpr double kTables[9][5] = {
    {0.04, 0.06, 0.08, 0.09, 0.10},  // gaussian
    {60, 25, 12, 5, 3},              // shot
    {0.01, 0.02, 0.03, 0.05, 0.07},  // impulse
    {0.15, 0.20, 0.35, 0.45, 0.60},  // speckle
    {2, 3, 4, 5, 6},                 // defocus
    {0.1, 0.2, 0.3, 0.4, 0.5},       // brightness
    {0.75, 0.6, 0.5, 0.4, 0.3},      // contrast
    {0.05, 0.10, 0.15, 0.20, 0.25},  // saturate
    {32, 16, 12, 8, 6},              // pixelate
};

struct Stats {
  double lo = 0.0, hi = 0.0, mean = 0.0, range = 1.0;
  std::size_t count = 0;
};

template <class Fn>
void for_each_value(FeatureSet& set, Fn&& fn) {
  for (auto& video : set.videos)
    for (auto& frame : video)
      for (auto& vec : frame)
        for (double& x : vec) fn(x);
}

Stats stats_of(const FeatureSet& set) {
  Stats s;
  s.lo = std::numeric_limits<double>::infinity();
  s.hi = -s.lo;
  double sum = 0.0;
  for (const auto& video : set.videos)
    for (const auto& frame : video)
      for (const auto& vec : frame)
        for (double x : vec) {
          s.lo = std::min(s.lo, x);
          s.hi = std::max(s.hi, x);
          sum += x;
          ++s.count;
        }
  if (s.count == 0) {
    s.lo = s.hi = 0.0;
    return s;
  }
  s.mean = sum / static_cast<double>(s.count);
  s.range = s.hi > s.lo ? s.hi - s.lo : 1.0;
  return s;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(i), values.end());
  const double a = values[i];
  if (i + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(i) + 1, values.end());
  return a + (pos - static_cast<double>(i)) * (b - a);
}

FeatureSet defocus(const FeatureSet& in, int window) {
  FeatureSet out = in;
  const int before = (window - 1) / 2;
  const int after = window - 1 - before;
  for (std::size_t v = 0; v < in.videos.size(); ++v) {
    const auto& frames = in.videos[v];
    const int n = static_cast<int>(frames.size());
    for (int f = 0; f < n; ++f) {
      for (std::size_t p = 0; p < frames[static_cast<std::size_t>(f)].size(); ++p) {
        auto& target = out.videos[v][static_cast<std::size_t>(f)][p];
        std::fill(target.begin(), target.end(), 0.0);
        int used = 0;
        for (int g = std::max(0, f - before); g <= std::min(n - 1, f + after); ++g) {
          const auto& frame = frames[static_cast<std::size_t>(g)];
          if (p >= frame.size() || frame[p].size() != target.size()) continue;
          for (std::size_t d = 0; d < target.size(); ++d) target[d] += frame[p][d];
          ++used;
        }
        for (double& x : target) x /= static_cast<double>(used);
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(CorruptionKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

CorruptionKind parse_corruption(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<CorruptionKind>(i);
  }
  throw ConfigError("unknown corruption '" + std::string(name) + "'");
}

double severity_parameter(CorruptionKind kind, int severity) {
  if (severity < 1 || severity > 5) throw ConfigError("severity must be in 1..5");
  return kTables[static_cast<std::size_t>(kind)][severity - 1];
}

double identity_parameter(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::shot_noise:
    case CorruptionKind::pixelate:
      return std::numeric_limits<double>::infinity();
    case CorruptionKind::defocus_blur:
    case CorruptionKind::contrast:
      return 1.0;
    default:
      return 0.0;
  }
}

void CorruptionSpec::validate() const {
  if (!parameter) {
    severity_parameter(kind, severity);
    return;
  }
  const double p = *parameter;
  if (std::isnan(p)) throw ConfigError("corruption parameter is NaN");
  if (p == identity_parameter(kind)) return;
  const auto fail = [&](const char* what) {
    throw ConfigError(std::string(to_string(kind)) + " parameter " + what);
  };
  if (!std::isfinite(p)) fail("must be finite");
  switch (kind) {
    case CorruptionKind::shot_noise:
      if (p <= 0.0) fail("must be > 0");
      break;
    case CorruptionKind::impulse_noise:
      if (p < 0.0 || p > 1.0) fail("must be in [0, 1]");
      break;
    case CorruptionKind::defocus_blur:
      if (p < 1.0 || p != std::floor(p)) fail("must be an integer >= 1");
      break;
    case CorruptionKind::saturate:
      if (p < 0.0 || p >= 0.5) fail("must be in [0, 0.5)");
      break;
    case CorruptionKind::pixelate:
      if (p < 2.0) fail("must be >= 2");
      break;
    default:
      if (p < 0.0) fail("must be >= 0");
      break;
  }
}

FeatureSet corrupt_features(const FeatureSet& features, const CorruptionSpec& spec) {
  spec.validate();
  const double param = spec.parameter ? *spec.parameter : severity_parameter(spec.kind, spec.severity);
  if (param == identity_parameter(spec.kind)) return features;

  const Stats s = stats_of(features);
  FeatureSet out = features;
  // Same substream for every severity so noise realisations are shared across levels.
  Rng rng(derive_seed(spec.seed, to_string(spec.kind)));
  const auto normalize = [&](double x) { return (x - s.lo) / s.range; };
  const auto restore = [&](double u) { return s.lo + u * s.range; };

  switch (spec.kind) {
    case CorruptionKind::gaussian_noise:
      for_each_value(out, [&](double& x) { x += param * s.range * rng.normal(); });
      break;
    case CorruptionKind::shot_noise:
      for_each_value(out, [&](double& x) {
        const double u = std::clamp(normalize(x), 0.0, 1.0);
        x = restore(static_cast<double>(rng.poisson(u * param)) / param);
      });
      break;
    case CorruptionKind::impulse_noise:
      for_each_value(out, [&](double& x) {
        const double hit = rng.uniform();
        const double side = rng.uniform();
        if (hit < param) x = side < 0.5 ? s.lo : s.hi;
      });
      break;
    case CorruptionKind::speckle_noise:
      for_each_value(out, [&](double& x) {
        const double u = normalize(x);
        x = restore(u + u * param * rng.normal());
      });
      break;
    case CorruptionKind::defocus_blur:
      out = defocus(features, static_cast<int>(param));
      break;
    case CorruptionKind::brightness:
      for_each_value(out, [&](double& x) { x += param * s.range; });
      break;
    case CorruptionKind::contrast:
      for_each_value(out, [&](double& x) { x = s.mean + param * (x - s.mean); });
      break;
    case CorruptionKind::saturate: {
      std::vector<double> values;
      values.reserve(s.count);
      for_each_value(out, [&](double& x) { values.push_back(x); });
      const double lo = quantile(values, param);
      const double hi = quantile(std::move(values), 1.0 - param);
      const double span = hi > lo ? hi - lo : 1.0;
      for_each_value(out, [&](double& x) { x = s.lo + (std::clamp(x, lo, hi) - lo) / span * (s.hi - s.lo); });
      break;
    }
    case CorruptionKind::pixelate: {
      const double steps = param - 1.0;
      for_each_value(out, [&](double& x) { x = restore(std::round(normalize(x) * steps) / steps); });
      break;
    }
  }
  return out;
}

const SweepRow* SweepTable::find(std::string_view corruption, int severity, Strategy strategy, int k) const {
  for (const auto& row : rows) {
    if (row.corruption == corruption && row.severity == severity && row.strategy == strategy && row.k == k) {
      return &row;
    }
  }
  return nullptr;
}

SweepTable robustness_sweep(const ModelParams& params, const DatasetAnnotations& test_data,
                            const FeatureConfig& feature_config, std::uint64_t feature_seed,
                            std::span<const CorruptionSpec> specs, const EvalSpec& eval) {
  for (const auto& spec : specs) spec.validate();
  const auto clean_features = generate_synthetic_video_batch(test_data, feature_config, feature_seed);
  const auto clean = evaluate_model(params, test_data, clean_features, eval);

  SweepTable table;
  for (const auto& row : clean.rows) {
    table.rows.push_back({"clean", 0, row.strategy, row.k, row.recall, row.mean_recall, 0.0});
  }
  for (const auto& spec : specs) {
    const auto metrics = evaluate_model(params, test_data, corrupt_features(clean_features, spec), eval);
    for (const auto& row : metrics.rows) {
      SweepRow out{std::string(to_string(spec.kind)), spec.severity, row.strategy, row.k,
                   row.recall, row.mean_recall, std::nullopt};
      const auto* base = clean.find(row.strategy, row.k);
      if (base && base->mean_recall && row.mean_recall && *base->mean_recall > 0.0) {
        out.delta_vs_clean_percent = (*row.mean_recall - *base->mean_recall) / *base->mean_recall * 100.0;
      }
      table.rows.push_back(std::move(out));
    }
  }
  return table;
}

}  // namespace tailmask
