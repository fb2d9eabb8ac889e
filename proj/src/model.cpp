#include "tailmask/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "tailmask/error.hpp"
#include "tailmask/rng.hpp"

namespace tailmask {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector affine(const Matrix& w, std::span<const double> b, std::span<const double> x) {
  Vector y(b.begin(), b.end());
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.data.data() + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
  return y;
}

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = -0.1 + 0.2 * rng.uniform();
  return m;
}

PredicateHead init_head(const ModelShape& shape, Rng& rng) {
  PredicateHead head;
  head.w1 = uniform_matrix(shape.hidden, shape.feature_dim, rng);
  head.b1.assign(shape.hidden, 0.0);
  head.w2 = uniform_matrix(shape.num_predicates, shape.hidden, rng);
  head.b2.assign(shape.num_predicates, 0.0);
  return head;
}

// grad[r, c] += a[r] * b[c]
void add_outer(Matrix& grad, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < grad.rows; ++r) {
    if (a[r] == 0.0) continue;
    double* row = grad.data.data() + r * grad.cols;
    for (std::size_t c = 0; c < grad.cols; ++c) row[c] += a[r] * b[c];
  }
}

}  // namespace

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  if (shape.feature_dim == 0 || shape.hidden == 0 || shape.num_predicates == 0 || shape.num_object_categories == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  ModelParams p;
  Rng observed(derive_seed(seed, "init-observed"));
  Rng anticipated(derive_seed(seed, "init-anticipated"));
  Rng object(derive_seed(seed, "init-object"));
  Rng box(derive_seed(seed, "init-box"));
  p.observed = init_head(shape, observed);
  p.anticipated = init_head(shape, anticipated);
  p.object_w = uniform_matrix(shape.num_object_categories, shape.feature_dim, object);
  p.object_b.assign(shape.num_object_categories, 0.0);
  p.anticip_a = Matrix::identity(shape.feature_dim);
  p.anticip_c.assign(shape.feature_dim, 0.0);
  p.box_w = uniform_matrix(4, shape.feature_dim, box);
  p.box_b.assign(4, 0.0);
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  for_each_tensor(out, [](const char*, std::size_t, std::size_t, std::vector<double>& data) {
    std::fill(data.begin(), data.end(), 0.0);
  });
  return out;
}

void axpy(ModelParams& params, double scale, const ModelParams& other) {
  std::vector<const std::vector<double>*> sources;
  for_each_tensor(other, [&](const char*, std::size_t, std::size_t, const std::vector<double>& data) {
    sources.push_back(&data);
  });
  std::size_t i = 0;
  for_each_tensor(params, [&](const char* name, std::size_t, std::size_t, std::vector<double>& data) {
    const auto& src = *sources[i++];
    if (src.size() != data.size()) throw ConsistencyError(std::string("shape mismatch in ") + name);
    for (std::size_t j = 0; j < data.size(); ++j) data[j] += scale * src[j];
  });
}

HeadForward forward_head(const PredicateHead& head, std::span<const double> z) {
  HeadForward out;
  out.pre_activation = affine(head.w1, head.b1, z);
  out.hidden.resize(out.pre_activation.size());
  for (std::size_t i = 0; i < out.hidden.size(); ++i) out.hidden[i] = std::max(0.0, out.pre_activation[i]);
  out.scores = affine(head.w2, head.b2, out.hidden);
  return out;
}

Vector backward_head(const PredicateHead& head, const HeadForward& cache, std::span<const double> z,
                     std::span<const double> score_grad, PredicateHead& grad) {
  add_outer(grad.w2, score_grad, cache.hidden);
  for (std::size_t k = 0; k < score_grad.size(); ++k) grad.b2[k] += score_grad[k];

  Vector pre_grad(head.w2.cols, 0.0);
  for (std::size_t k = 0; k < head.w2.rows; ++k) {
    if (score_grad[k] == 0.0) continue;
    const auto row = head.w2.row(k);
    for (std::size_t j = 0; j < row.size(); ++j) pre_grad[j] += row[j] * score_grad[k];
  }
  // ReLU subgradient is 0 at the kink.
  for (std::size_t j = 0; j < pre_grad.size(); ++j) {
    if (!(cache.pre_activation[j] > 0.0)) pre_grad[j] = 0.0;
  }
  add_outer(grad.w1, pre_grad, z);
  for (std::size_t j = 0; j < pre_grad.size(); ++j) grad.b1[j] += pre_grad[j];

  Vector z_grad(head.w1.cols, 0.0);
  for (std::size_t j = 0; j < head.w1.rows; ++j) {
    if (pre_grad[j] == 0.0) continue;
    const auto row = head.w1.row(j);
    for (std::size_t c = 0; c < row.size(); ++c) z_grad[c] += row[c] * pre_grad[j];
  }
  return z_grad;
}

Prediction forward_scores(const ModelParams& params, std::span<const double> z) {
  if (z.size() != params.observed.w1.cols || z.size() != params.object_w.cols) {
    throw DomainError("feature has dimension " + std::to_string(z.size()) + ", model expects " +
                      std::to_string(params.observed.w1.cols));
  }
  Prediction out;
  out.predicate_scores = forward_head(params.observed, z).scores;
  out.object_probs = softmax(affine(params.object_w, params.object_b, z));
  return out;
}

std::vector<Vector> anticipate(const ModelParams& params, std::span<const double> z_last, int steps) {
  if (steps < 1) throw DomainError("anticipation needs at least one step");
  if (z_last.size() != params.anticip_a.cols) throw DomainError("feature dimension does not match the anticipation map");
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(steps));
  Vector z(z_last.begin(), z_last.end());
  for (int s = 0; s < steps; ++s) {
    z = affine(params.anticip_a, params.anticip_c, z);
    out.push_back(z);
  }
  return out;
}

std::vector<Vector> class_prototypes(std::size_t num_classes, const FeatureConfig& config) {
  std::vector<Vector> out(num_classes, Vector(config.dim));
  for (std::size_t k = 0; k < num_classes; ++k) {
    Rng rng(derive_seed(config.prototype_seed, "prototype", k));
    for (auto& v : out[k]) v = rng.normal();
  }
  return out;
}

FeatureSet generate_synthetic_video_batch(const DatasetAnnotations& data, const FeatureConfig& config,
                                          std::uint64_t seed) {
  if (config.dim == 0) throw ConfigError("feature dimension must be positive");
  if (!(config.noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!(config.ar_coefficient >= 0.0 && config.ar_coefficient < 1.0)) {
    throw ConfigError("AR coefficient must be in [0, 1)");
  }
  const auto prototypes = class_prototypes(data.ontology.num_predicates(), config);
  const double a = config.ar_coefficient;
  const double innovation = std::sqrt(1.0 - a * a) * config.noise_std;

  FeatureSet out;
  out.videos.resize(data.videos.size());
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    Rng rng(derive_seed(seed, "features", v));
    std::map<std::pair<ObjectId, ObjectId>, Vector> noise;
    for (const auto& frame : data.videos[v].frames) {
      const auto pairs = frame_pairs(frame);
      std::vector<Vector> features;
      for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        Vector z(config.dim, 0.0);
        for (ClassId k : pairs.positives[p]) {
          const auto& proto = prototypes[static_cast<std::size_t>(k)];
          for (std::size_t i = 0; i < z.size(); ++i) z[i] += proto[i];
        }
        const double count = static_cast<double>(pairs.positives[p].size());
        for (auto& x : z) x /= count;

        auto [it, fresh] = noise.try_emplace(pairs.pairs[p], Vector(config.dim, 0.0));
        auto& eps = it->second;
        for (std::size_t i = 0; i < eps.size(); ++i) {
          const double xi = rng.normal();
          eps[i] = fresh ? config.noise_std * xi : a * eps[i] + innovation * xi;
          z[i] += eps[i];
        }
        features.push_back(std::move(z));
      }
      out.videos[v].push_back(std::move(features));
    }
  }
  return out;
}

}  // namespace tailmask
