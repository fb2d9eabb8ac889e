#include <gtest/gtest.h>

#include <cmath>

#include "tailmask/error.hpp"
#include "tailmask/synth.hpp"
#include "tailmask/train.hpp"

using namespace tailmask;

namespace {

DatasetAnnotations tiny_data(int frames, std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.n_videos = 1;
  cfg.frames_per_video = frames;
  cfg.pairs_per_frame = 2;
  cfg.classes_per_category = {4};
  cfg.num_object_categories = 3;
  cfg.label_rate = 1.0;
  cfg.seed = seed;
  return synth_longtail_dataset(cfg);
}

TrainConfig tiny_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = 1;
  c.learning_rate = 1e-3;
  c.clip_norm = 0.0;
  c.schedule = MaskSchedule::fixed(0.5);
  c.hidden = 5;
  c.features.dim = 4;
  c.features.noise_std = 1.0;
  c.weights = {1.0, 0.7, 1.3, 0.4, 0.9};
  return c;
}

std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> out;
  for_each_tensor(p, [&](const char*, std::size_t, std::size_t, const std::vector<double>& d) {
    out.insert(out.end(), d.begin(), d.end());
  });
  return out;
}

std::vector<double*> flat_refs(ModelParams& p) {
  std::vector<double*> out;
  for_each_tensor(p, [&](const char*, std::size_t, std::size_t, std::vector<double>& d) {
    for (double& x : d) out.push_back(&x);
  });
  return out;
}

// The training objective recomputed from the public building blocks.
double objective_oracle(const ModelParams& p, const DatasetAnnotations& data, const TrainConfig& cfg) {
  const auto features = generate_synthetic_video_batch(data, cfg.features, cfg.feature_seed);
  const auto masks = generate_epoch_masks(0, cfg.schedule, data, cfg.mask_seed, cfg.mask_options);
  const auto& video = data.videos[0];
  const auto bits_of = [&](std::size_t f, const std::vector<int>& slots) {
    std::vector<std::uint8_t> bits;
    for (int s : slots) bits.push_back(masks.frame_bits(0, f)[static_cast<std::size_t>(s)]);
    return bits;
  };
  double total = 0.0;
  for (std::size_t f = 0; f < video.frames.size(); ++f) {
    const auto pairs = frame_pairs(video.frames[f]);
    for (std::size_t q = 0; q < pairs.pairs.size(); ++q) {
      const auto& z = features.videos[0][f][q];
      total += cfg.weights.gen *
               masked_predicate_loss(forward_head(p.observed, z).scores, pairs.positives[q], bits_of(f, pairs.slots[q])).value;
      const auto logits = affine(p.object_w, p.object_b, z);
      total += cfg.weights.obj * (cross_entropy_logits_with_grad(logits, video.frames[f].find_object(pairs.pairs[q].first)->category).value +
                                  cross_entropy_logits_with_grad(logits, video.frames[f].find_object(pairs.pairs[q].second)->category).value);
    }
  }
  if (cfg.mode != TrainMode::sga) return total;
  const int frames = static_cast<int>(video.frames.size());
  for (int cutoff = 3; cutoff <= frames - 1; ++cutoff) {
    const auto last = static_cast<std::size_t>(cutoff - 1);
    const auto last_pairs = frame_pairs(video.frames[last]);
    for (std::size_t q = 0; q < last_pairs.pairs.size(); ++q) {
      const int steps = std::min(cfg.horizon, frames - cutoff);
      const auto rollout = anticipate(p, features.videos[0][last][q], steps);
      for (int s = 0; s < steps; ++s) {
        const auto f = last + 1 + static_cast<std::size_t>(s);
        const auto pairs = frame_pairs(video.frames[f]);
        const int idx = pairs.find(last_pairs.pairs[q].first, last_pairs.pairs[q].second);
        if (idx < 0) continue;
        const auto i = static_cast<std::size_t>(idx);
        const auto& zhat = rollout[static_cast<std::size_t>(s)];
        total += cfg.weights.ant * masked_predicate_loss(forward_head(p.anticipated, zhat).scores, pairs.positives[i],
                                                         bits_of(f, pairs.slots[i])).value;
        total += cfg.weights.recon * smooth_l1_with_grad(zhat, features.videos[0][f][i]).value /
                 static_cast<double>(pairs.pairs.size());
        const auto& box = video.frames[f].find_object(last_pairs.pairs[q].second)->box;
        const std::vector<double> target{box.x0, box.y0, box.x1, box.y1};
        total += cfg.weights.boxes * smooth_l1_with_grad(affine(p.box_w, p.box_b, zhat), target).value;
      }
    }
  }
  return total;
}

void check_gradient(TrainMode mode, int frames) {
  const auto data = tiny_data(frames);
  const auto cfg = tiny_config(mode);
  const ModelShape shape{cfg.features.dim, cfg.hidden, data.ontology.num_predicates(),
                         data.ontology.num_object_categories()};
  auto before = init_params(shape, cfg.init_seed);
  const auto after = train(data, cfg).params;
  const auto b = flatten(before), a = flatten(after);
  std::vector<double> implemented(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) implemented[i] = (b[i] - a[i]) / cfg.learning_rate;

  auto refs = flat_refs(before);
  std::vector<double> fd(refs.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double saved = *refs[i];
    *refs[i] = saved + h;
    const double up = objective_oracle(before, data, cfg);
    *refs[i] = saved - h;
    const double down = objective_oracle(before, data, cfg);
    *refs[i] = saved;
    fd[i] = (up - down) / (2 * h);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (fd[i] - implemented[i]) * (fd[i] - implemented[i]);
    den += fd[i] * fd[i];
  }
  EXPECT_GT(den, 0.0);
  EXPECT_LE(std::sqrt(num / den), 1e-4);
}

DatasetAnnotations medium_data(int frames = 6) {
  SynthConfig cfg;
  cfg.n_videos = 8;
  cfg.frames_per_video = frames;
  cfg.classes_per_category = {6};
  cfg.label_persistence = 0.7;
  cfg.seed = 4;
  return synth_longtail_dataset(cfg);
}

}  // namespace

TEST(Train, VidsggStepFollowsObjectiveGradient) { check_gradient(TrainMode::vidsgg, 4); }

TEST(Train, SgaStepFollowsObjectiveGradient) { check_gradient(TrainMode::sga, 7); }

TEST(Train, Deterministic) {
  const auto data = medium_data();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.schedule = MaskSchedule::linear(0.3);
  cfg.mode = TrainMode::sga;
  const auto a = train(data, cfg), b = train(data, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.report.epochs.back().total, b.report.epochs.back().total);
  cfg.order_seed = 99;
  EXPECT_NE(train(data, cfg).params, a.params);
}

TEST(Train, ZeroRatioEqualsUnmaskedTraining) {
  const auto data = medium_data();
  for (TrainMode mode : {TrainMode::vidsgg, TrainMode::sga}) {
    TrainConfig cfg;
    cfg.mode = mode;
    cfg.epochs = 2;
    cfg.schedule = MaskSchedule::fixed(0.0);
    const auto zero = train(data, cfg);
    cfg.masking_enabled = false;
    const auto plain = train(data, cfg);
    EXPECT_EQ(zero.params, plain.params);
    EXPECT_EQ(zero.report.epochs[1].total, plain.report.epochs[1].total);
  }
}

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
  const auto data = medium_data();
  TrainConfig cfg;
  cfg.mode = TrainMode::sga;
  cfg.learning_rate = 0.0;
  cfg.epochs = 1;
  const ModelShape shape{cfg.features.dim, cfg.hidden, data.ontology.num_predicates(),
                         data.ontology.num_object_categories()};
  EXPECT_EQ(train(data, cfg).params, init_params(shape, cfg.init_seed));
}

TEST(Train, SgaWithoutAnticipationTermsMatchesVidsgg) {
  const auto data = medium_data();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.schedule = MaskSchedule::fixed(0.4);
  const auto vid = train(data, cfg);
  cfg.mode = TrainMode::sga;
  cfg.weights.ant = cfg.weights.boxes = cfg.weights.recon = 0.0;
  const auto sga = train(data, cfg);
  EXPECT_EQ(sga.params, vid.params);
  EXPECT_EQ(sga.report.epochs[1].total, vid.report.epochs[1].total);
}

TEST(Train, ShortVideosAreSkippedForAnticipation) {
  const auto data = medium_data(3);
  TrainConfig cfg;
  cfg.mode = TrainMode::sga;
  cfg.epochs = 1;
  const auto result = train(data, cfg);
  EXPECT_EQ(result.report.skipped_videos, data.videos.size());
  EXPECT_EQ(result.report.epochs[0].total, 0.0);
  cfg.mode = TrainMode::vidsgg;
  EXPECT_EQ(train(data, cfg).report.skipped_videos, 0u);
}

TEST(Train, LossDecreasesAndRecordsMasks) {
  const auto data = medium_data();
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.schedule = MaskSchedule::fixed(0.3);
  const auto result = train(data, cfg);
  ASSERT_EQ(result.report.epochs.size(), 4u);
  EXPECT_LT(result.report.epochs.back().gen, result.report.epochs.front().gen);
  for (const auto& e : result.report.epochs) {
    EXPECT_EQ(e.mask_ratio, 0.3);
    EXPECT_EQ(static_cast<std::int64_t>(e.masked_labels), std::llround(0.3 * static_cast<double>(data.num_labels())));
  }
}

TEST(Train, ConfigValidation) {
  const auto data = medium_data();
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train(data, cfg), ConfigError);
  cfg = {};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(train(data, cfg), ConfigError);
  cfg = {};
  EXPECT_THROW(train_sga(data, cfg), ConfigError);
  EXPECT_EQ(parse_train_mode("sga"), TrainMode::sga);
  EXPECT_THROW(parse_train_mode("other"), ConfigError);
}

TEST(Scoring, AnticipatedFrameCounts) {
  const auto data = medium_data(10);
  TrainConfig cfg;
  const ModelShape shape{cfg.features.dim, cfg.hidden, data.ontology.num_predicates(),
                         data.ontology.num_object_categories()};
  const auto params = init_params(shape, 1);
  const auto features = generate_synthetic_video_batch(data, cfg.features, 2);
  EXPECT_EQ(score_observed(params, data, features).size(), data.num_frames());
  for (double fraction : {0.3, 0.5, 0.7, 0.9}) {
    const auto observed = static_cast<std::size_t>(std::floor(fraction * 10));
    const auto frames = score_anticipated(params, data, features, fraction);
    EXPECT_EQ(frames.size(), data.videos.size() * (10 - observed)) << fraction;
    EXPECT_EQ(frames.front().ground_truth.frame_index, static_cast<int>(observed));
  }
}
