#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailmask/core_data.hpp"
#include "tailmask/loss.hpp"

namespace tailmask {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix identity(std::size_t n);
  bool operator==(const Matrix&) const = default;
};

using Vector = std::vector<double>;

/// y = W x + b.
Vector affine(const Matrix& w, std::span<const double> b, std::span<const double> x);

/// Two-layer predicate decoder: scores = W2 relu(W1 z + b1) + b2.
struct PredicateHead {
  Matrix w1;  // hidden x dim
  Vector b1;
  Matrix w2;  // classes x hidden
  Vector b2;
  bool operator==(const PredicateHead&) const = default;
};

/**
 * Parameters of the toy pipeline.
 *
 * `observed` decodes observed pair features, `anticipated` decodes anticipated
 * ones. The anticipation recurrence is z_{t+1} = A z_t + c and the box head maps
 * an anticipated feature to the object's box.
 */
struct ModelParams {
  PredicateHead observed;
  PredicateHead anticipated;
  Matrix object_w;  // object categories x dim
  Vector object_b;
  Matrix anticip_a;  // dim x dim
  Vector anticip_c;
  Matrix box_w;  // 4 x dim
  Vector box_b;

  bool operator==(const ModelParams&) const = default;
};

struct ModelShape {
  std::size_t feature_dim = 32;
  std::size_t hidden = 64;
  std::size_t num_predicates = 0;
  std::size_t num_object_categories = 0;
};

/// Uniform(-0.1, 0.1) weights, zero biases, A = identity, c = 0. Each group has its own substream.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

/// Zero-valued parameters of the same shapes (used as a gradient accumulator).
ModelParams zeros_like(const ModelParams& params);

/// Calls fn(name, rows, cols, data) for every tensor in a fixed order.
/// Bias vectors are reported as (size x 1).
template <class Params, class Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  auto matrix = [&](const char* name, auto& m) { fn(name, m.rows, m.cols, m.data); };
  auto vector = [&](const char* name, auto& v) { fn(name, v.size(), std::size_t{1}, v); };
  matrix("observed.w1", p.observed.w1);
  vector("observed.b1", p.observed.b1);
  matrix("observed.w2", p.observed.w2);
  vector("observed.b2", p.observed.b2);
  matrix("anticipated.w1", p.anticipated.w1);
  vector("anticipated.b1", p.anticipated.b1);
  matrix("anticipated.w2", p.anticipated.w2);
  vector("anticipated.b2", p.anticipated.b2);
  matrix("object.w", p.object_w);
  vector("object.b", p.object_b);
  matrix("anticipation.a", p.anticip_a);
  vector("anticipation.c", p.anticip_c);
  matrix("box.w", p.box_w);
  vector("box.b", p.box_b);
}

/// params += scale * other
void axpy(ModelParams& params, double scale, const ModelParams& other);

/// Predicate scores plus the activations needed by the backward pass.
struct HeadForward {
  Vector pre_activation;
  Vector hidden;
  Vector scores;
};

HeadForward forward_head(const PredicateHead& head, std::span<const double> z);

/// Accumulates d(loss)/d(params) into `grad`; returns d(loss)/dz.
Vector backward_head(const PredicateHead& head, const HeadForward& cache, std::span<const double> z,
                     std::span<const double> score_grad, PredicateHead& grad);

struct Prediction {
  Vector predicate_scores;
  Vector object_probs;
};

/// Observed-head predicate scores and object-category probabilities for one feature.
/// Throws DomainError on a dimension mismatch.
Prediction forward_scores(const ModelParams& params, std::span<const double> z);

/// z_{T+1..T+steps} by iterating z <- A z + c from z_T. Throws DomainError for steps < 1.
std::vector<Vector> anticipate(const ModelParams& params, std::span<const double> z_last, int steps);

// ---------------------------------------------------------------------------
// Synthetic pair features

struct FeatureConfig {
  std::size_t dim = 32;
  double noise_std = 0.5;
  double ar_coefficient = 0.8;
  std::uint64_t prototype_seed = 0x70726f746fULL;
};

/// Features of every annotated pair, aligned with frame_pairs() of each frame.
struct FeatureSet {
  /// videos[v][f][p]
  std::vector<std::vector<std::vector<Vector>>> videos;
  bool operator==(const FeatureSet&) const = default;
};

/// Fixed per-class prototype vectors (standard normal entries).
std::vector<Vector> class_prototypes(std::size_t num_classes, const FeatureConfig& config);

/**
 * Pair feature = mean of the prototypes of its positive labels + noise.
 * The noise is an AR(1) process per pair track within a video,
 * eps_t = a eps_{t-1} + sqrt(1 - a^2) sigma xi_t, so its stationary std is sigma.
 */
FeatureSet generate_synthetic_video_batch(const DatasetAnnotations& data, const FeatureConfig& config,
                                          std::uint64_t seed);

}  // namespace tailmask
