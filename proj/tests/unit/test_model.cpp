#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "test_support.hpp"
#include "tailmask/error.hpp"
#include "tailmask/model.hpp"
#include "tailmask/synth.hpp"

using namespace tailmask;

namespace {

ModelShape small_shape() { return {6, 5, 4, 3}; }

Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Loss used for the head gradient check: <g, scores>.
double linear_probe(const PredicateHead& head, const Vector& z, const Vector& g) {
  const auto out = forward_head(head, z);
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += g[k] * out.scores[k];
  return s;
}

}  // namespace

TEST(Model, InitShapesAndRanges) {
  const auto p = init_params(small_shape(), 1);
  EXPECT_EQ(p.observed.w1.rows, 5u);
  EXPECT_EQ(p.observed.w1.cols, 6u);
  EXPECT_EQ(p.observed.w2.rows, 4u);
  EXPECT_EQ(p.object_w.rows, 3u);
  EXPECT_EQ(p.box_w.rows, 4u);
  EXPECT_EQ(p.anticip_a, Matrix::identity(6));
  for (double c : p.anticip_c) EXPECT_EQ(c, 0.0);
  for (double w : p.observed.w1.data) {
    EXPECT_GE(w, -0.1);
    EXPECT_LT(w, 0.1);
  }
  for (double b : p.observed.b1) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(init_params(small_shape(), 1), p);
  EXPECT_NE(init_params(small_shape(), 2), p);
}

TEST(Model, ZerosLikeAndAxpy) {
  auto p = init_params(small_shape(), 1);
  const auto copy = p;
  const auto z = zeros_like(p);
  for_each_tensor(z, [](const char*, std::size_t, std::size_t, const std::vector<double>& d) {
    for (double x : d) EXPECT_EQ(x, 0.0);
  });
  axpy(p, 2.0, copy);
  EXPECT_DOUBLE_EQ(p.observed.w1(1, 2), 3.0 * copy.observed.w1(1, 2));
  EXPECT_DOUBLE_EQ(p.anticip_a(0, 0), 3.0);
}

TEST(Model, HeadBackwardMatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = init_params(small_shape(), static_cast<std::uint64_t>(trial));
    for (double& b : params.observed.b1) b = 0.05 * rng.normal();
    const Vector z = random_vector(rng, 6);
    const Vector g = random_vector(rng, 4);
    const auto cache = forward_head(params.observed, z);
    bool near_kink = false;
    for (double a : cache.pre_activation) near_kink |= std::abs(a) < 1e-4;
    if (near_kink) continue;

    PredicateHead grad{Matrix(5, 6), Vector(5, 0.0), Matrix(4, 5), Vector(4, 0.0)};
    const auto dz = backward_head(params.observed, cache, z, g, grad);
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.observed.w1.data.size(); ++i) {
      auto& w = params.observed.w1.data[i];
      const double saved = w;
      w = saved + h;
      const double up = linear_probe(params.observed, z, g);
      w = saved - h;
      const double down = linear_probe(params.observed, z, g);
      w = saved;
      EXPECT_NEAR(grad.w1.data[i], (up - down) / (2 * h), 1e-6);
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      EXPECT_NEAR(dz[i], (linear_probe(params.observed, zp, g) - linear_probe(params.observed, zm, g)) / (2 * h), 1e-6);
    }
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(grad.b2[k], g[k]);
  }
}

TEST(Model, AnticipationConvergesToFixedPoint) {
  // z <- A z + c with spectral radius < 1 converges to (I - A)^{-1} c.
  auto params = init_params(small_shape(), 3);
  Rng rng(5);
  Eigen::MatrixXd a(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      params.anticip_a(i, j) = 0.1 * rng.normal() + (i == j ? 0.3 : 0.0);
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = params.anticip_a(i, j);
    }
  Eigen::VectorXd c(6);
  for (std::size_t i = 0; i < 6; ++i) c(static_cast<Eigen::Index>(i)) = params.anticip_c[i] = rng.normal();
  ASSERT_LT(a.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
  const Eigen::VectorXd fixed = (Eigen::MatrixXd::Identity(6, 6) - a).lu().solve(c);

  const auto traj = anticipate(params, random_vector(rng, 6, 5.0), 400);
  ASSERT_EQ(traj.size(), 400u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(traj.back()[i], fixed(static_cast<Eigen::Index>(i)), 1e-9);

  EXPECT_THROW(anticipate(params, Vector(6, 0.0), 0), DomainError);
  EXPECT_THROW(anticipate(params, Vector(5, 0.0), 1), DomainError);
}

TEST(Model, IdentityAnticipationKeepsFeature) {
  const auto params = init_params(small_shape(), 3);
  const Vector z{1, 2, 3, 4, 5, 6};
  for (const auto& step : anticipate(params, z, 3)) EXPECT_EQ(step, z);
}

TEST(Model, ForwardScoresGivesDistribution) {
  const auto params = init_params(small_shape(), 3);
  Rng rng(6);
  const auto pred = forward_scores(params, random_vector(rng, 6));
  EXPECT_EQ(pred.predicate_scores.size(), 4u);
  double total = 0.0;
  for (double p : pred.object_probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW(forward_scores(params, Vector(3, 0.0)), DomainError);
}

TEST(Features, NoiselessFeatureIsPrototypeMean) {
  SynthConfig cfg;
  cfg.n_videos = 2;
  cfg.classes_per_category = {3, 4};
  cfg.seed = 2;
  const auto data = synth_longtail_dataset(cfg);
  FeatureConfig fc;
  fc.dim = 8;
  fc.noise_std = 0.0;
  const auto features = generate_synthetic_video_batch(data, fc, 1);
  const auto protos = class_prototypes(data.ontology.num_predicates(), fc);
  const auto& frame = data.videos[1].frames[3];
  const auto pairs = frame_pairs(frame);
  for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
    for (std::size_t d = 0; d < fc.dim; ++d) {
      double mean = 0.0;
      for (ClassId c : pairs.positives[p]) mean += protos[static_cast<std::size_t>(c)][d];
      mean /= static_cast<double>(pairs.positives[p].size());
      EXPECT_NEAR(features.videos[1][3][p][d], mean, 1e-15);
    }
  }
}

TEST(Features, DeterministicAndSeedSensitive) {
  SynthConfig cfg;
  cfg.n_videos = 3;
  const auto data = synth_longtail_dataset(cfg);
  FeatureConfig fc;
  EXPECT_EQ(generate_synthetic_video_batch(data, fc, 5), generate_synthetic_video_batch(data, fc, 5));
  EXPECT_NE(generate_synthetic_video_batch(data, fc, 5), generate_synthetic_video_batch(data, fc, 6));
  fc.ar_coefficient = 1.0;
  EXPECT_THROW(generate_synthetic_video_batch(data, fc, 5), ConfigError);
}

TEST(Features, NoiseIsStationaryAr1) {
  // One persistent pair with a fixed label: feature - prototype is the AR(1) noise.
  DatasetAnnotations data;
  data.ontology = tailmask::testing::single_category(2);
  VideoAnnotations video{"v", {}};
  for (int t = 0; t < 600; ++t) video.frames.push_back(tailmask::testing::make_frame(t, 2, {{0, 1, 0}}));
  data.videos.push_back(video);

  FeatureConfig fc;
  fc.dim = 16;
  fc.noise_std = 0.7;
  fc.ar_coefficient = 0.8;
  const auto features = generate_synthetic_video_batch(data, fc, 3);
  const auto proto = class_prototypes(2, fc)[0];

  const Eigen::Index rows = 599 * 16;
  Eigen::VectorXd x(rows), y(rows);
  double sq = 0.0;
  Eigen::Index r = 0;
  for (std::size_t t = 1; t < 600; ++t)
    for (std::size_t d = 0; d < 16; ++d, ++r) {
      x(r) = features.videos[0][t - 1][0][d] - proto[d];
      y(r) = features.videos[0][t][0][d] - proto[d];
      sq += y(r) * y(r);
    }
  const double a_hat = x.colPivHouseholderQr().solve(y)(0);
  EXPECT_NEAR(a_hat, 0.8, 0.03);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(rows)), 0.7, 0.05);
}
