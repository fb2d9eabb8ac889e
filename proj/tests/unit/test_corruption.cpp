#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tailmask/corruption.hpp"
#include "tailmask/error.hpp"
#include "tailmask/synth.hpp"

using namespace tailmask;

namespace {

FeatureSet sample_features(std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.n_videos = 6;
  cfg.classes_per_category = {8};
  cfg.seed = seed;
  FeatureConfig fc;
  fc.dim = 16;
  return generate_synthetic_video_batch(synth_longtail_dataset(cfg), fc, seed);
}

std::vector<double> values(const FeatureSet& f) {
  std::vector<double> out;
  for (const auto& v : f.videos)
    for (const auto& fr : v)
      for (const auto& z : fr) out.insert(out.end(), z.begin(), z.end());
  return out;
}

double range_of(const std::vector<double>& x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

CorruptionSpec spec(CorruptionKind kind, int severity, std::uint64_t seed = 3) { return {kind, severity, seed, std::nullopt}; }

}  // namespace

TEST(Corruption, NamesRoundTrip) {
  for (CorruptionKind kind : kAllCorruptions) EXPECT_EQ(parse_corruption(to_string(kind)), kind);
  EXPECT_THROW(parse_corruption("fog"), ConfigError);
}

TEST(Corruption, SeverityTables) {
  EXPECT_EQ(severity_parameter(CorruptionKind::gaussian_noise, 1), 0.04);
  EXPECT_EQ(severity_parameter(CorruptionKind::gaussian_noise, 5), 0.10);
  EXPECT_EQ(severity_parameter(CorruptionKind::contrast, 3), 0.5);
  EXPECT_EQ(severity_parameter(CorruptionKind::pixelate, 5), 6.0);
  EXPECT_THROW(severity_parameter(CorruptionKind::brightness, 0), ConfigError);
  EXPECT_THROW(severity_parameter(CorruptionKind::brightness, 6), ConfigError);
}

TEST(Corruption, IdentityParameterIsExactCopy) {
  const auto f = sample_features();
  for (CorruptionKind kind : kAllCorruptions) {
    CorruptionSpec s{kind, 1, 3, identity_parameter(kind)};
    EXPECT_EQ(corrupt_features(f, s), f) << to_string(kind);
  }
}

TEST(Corruption, EveryKindChangesFeaturesAndKeepsShape) {
  const auto f = sample_features();
  for (CorruptionKind kind : kAllCorruptions) {
    const auto c = corrupt_features(f, spec(kind, 3));
    ASSERT_EQ(values(c).size(), values(f).size());
    EXPECT_NE(c, f) << to_string(kind);
    EXPECT_EQ(corrupt_features(f, spec(kind, 3)), c) << to_string(kind);
  }
}

TEST(Corruption, GaussianNoiseMoments) {
  const auto f = sample_features();
  const auto x = values(f);
  const double r = range_of(x);
  const auto y = values(corrupt_features(f, spec(CorruptionKind::gaussian_noise, 5)));
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = y[i] - x[i];
    s += d;
    s2 += d * d;
  }
  const double n = static_cast<double>(x.size());
  const double sigma = 0.10 * r;
  EXPECT_NEAR(s / n, 0.0, 4.0 * sigma / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(s2 / n), sigma, 0.03 * sigma);
}

TEST(Corruption, GaussianDeviationGrowsWithSeverity) {
  const auto f = sample_features();
  const auto x = values(f);
  double previous = 0.0;
  for (int sev = 1; sev <= 5; ++sev) {
    const auto y = values(corrupt_features(f, spec(CorruptionKind::gaussian_noise, sev)));
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += std::abs(y[i] - x[i]);
    EXPECT_GT(d, previous) << sev;
    previous = d;
  }
}

TEST(Corruption, ImpulseFlipsExpectedFraction) {
  const auto f = sample_features();
  const auto x = values(f);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const auto y = values(corrupt_features(f, spec(CorruptionKind::impulse_noise, 5)));
  std::size_t changed = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] != x[i]) {
      ++changed;
      EXPECT_TRUE(y[i] == *lo || y[i] == *hi);
    }
  }
  const double n = static_cast<double>(x.size());
  EXPECT_NEAR(static_cast<double>(changed), 0.07 * n, 4.0 * std::sqrt(n * 0.07 * 0.93));
}

TEST(Corruption, BrightnessAndContrast) {
  const auto f = sample_features();
  const auto x = values(f);
  const double r = range_of(x);
  const auto b = values(corrupt_features(f, spec(CorruptionKind::brightness, 2)));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(b[i] - x[i], 0.2 * r, 1e-12);

  const auto c = values(corrupt_features(f, spec(CorruptionKind::contrast, 3)));
  double mx = 0.0, mc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    mc += c[i];
  }
  EXPECT_NEAR(mc / x.size(), mx / x.size(), 1e-9);
  EXPECT_NEAR(range_of(c), 0.5 * r, 1e-9);
}

TEST(Corruption, PixelateQuantises) {
  const auto f = sample_features();
  const auto y = values(corrupt_features(f, spec(CorruptionKind::pixelate, 5)));
  std::set<double> levels(y.begin(), y.end());
  EXPECT_LE(levels.size(), 6u);
}

TEST(Corruption, SaturateKeepsRange) {
  const auto f = sample_features();
  const auto x = values(f);
  const auto y = values(corrupt_features(f, spec(CorruptionKind::saturate, 4)));
  EXPECT_NEAR(range_of(y), range_of(x), 1e-9);
  // Clipped mass piles up on both ends.
  const auto lo = *std::min_element(y.begin(), y.end());
  EXPECT_GT(std::count_if(y.begin(), y.end(), [&](double v) { return std::abs(v - lo) < 1e-12; }), 10);
}

TEST(Corruption, DefocusAveragesOverTime) {
  auto f = sample_features();
  // A constant track is unchanged by temporal averaging.
  for (auto& frame : f.videos[0])
    for (auto& z : frame) std::fill(z.begin(), z.end(), 0.25);
  const auto y = corrupt_features(f, spec(CorruptionKind::defocus_blur, 4));
  for (const auto& frame : y.videos[0])
    for (const auto& z : frame)
      for (double v : z) EXPECT_NEAR(v, 0.25, 1e-15);
  // Window 3 centred on frame 1 of video 1: mean of frames 0..2.
  const auto w3 = corrupt_features(f, {CorruptionKind::defocus_blur, 1, 0, 3.0});
  const auto& src = f.videos[1];
  EXPECT_NEAR(w3.videos[1][1][0][0], (src[0][0][0] + src[1][0][0] + src[2][0][0]) / 3.0, 1e-12);
}

TEST(Corruption, ShotAndSpeckleStayNearSignal) {
  const auto f = sample_features();
  const auto x = values(f);
  for (CorruptionKind kind : {CorruptionKind::shot_noise, CorruptionKind::speckle_noise}) {
    const auto y1 = values(corrupt_features(f, spec(kind, 1)));
    const auto y5 = values(corrupt_features(f, spec(kind, 5)));
    double d1 = 0.0, d5 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      d1 += std::abs(y1[i] - x[i]);
      d5 += std::abs(y5[i] - x[i]);
    }
    EXPECT_LT(d1, d5) << to_string(kind);
  }
}

TEST(Corruption, ParameterValidation) {
  EXPECT_THROW((CorruptionSpec{CorruptionKind::impulse_noise, 1, 0, 1.5}).validate(), ConfigError);
  EXPECT_THROW((CorruptionSpec{CorruptionKind::defocus_blur, 1, 0, 2.5}).validate(), ConfigError);
  EXPECT_THROW((CorruptionSpec{CorruptionKind::saturate, 1, 0, 0.5}).validate(), ConfigError);
  EXPECT_THROW((CorruptionSpec{CorruptionKind::gaussian_noise, 7, 0, std::nullopt}).validate(), ConfigError);
  EXPECT_NO_THROW((CorruptionSpec{CorruptionKind::gaussian_noise, 7, 0, 0.2}).validate());
}

TEST(Sweep, CleanRowsAndDeltas) {
  SynthConfig cfg;
  cfg.n_videos = 4;
  cfg.classes_per_category = {5};
  const auto data = synth_longtail_dataset(cfg);
  const ModelShape shape{32, 8, 5, 6};
  const auto params = init_params(shape, 1);
  EvalSpec eval;
  eval.ks = {10};
  eval.strategies = {Strategy::with_constraint};
  const std::vector<CorruptionSpec> specs{spec(CorruptionKind::gaussian_noise, 1), spec(CorruptionKind::contrast, 2)};
  const auto table = robustness_sweep(params, data, FeatureConfig{}, 2, specs, eval);
  ASSERT_EQ(table.rows.size(), 3u);
  const auto* clean = table.find("clean", 0, Strategy::with_constraint, 10);
  ASSERT_NE(clean, nullptr);
  EXPECT_EQ(*clean->delta_vs_clean_percent, 0.0);
  const auto* noisy = table.find("gaussian_noise", 1, Strategy::with_constraint, 10);
  ASSERT_NE(noisy, nullptr);
  EXPECT_NEAR(*noisy->delta_vs_clean_percent,
              (*noisy->mean_recall - *clean->mean_recall) / *clean->mean_recall * 100.0, 1e-12);
}
