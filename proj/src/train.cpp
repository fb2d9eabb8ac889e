#include "tailmask/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

#include "tailmask/error.hpp"
#include "tailmask/rng.hpp"

namespace tailmask {

std::string_view to_string(TrainMode mode) { return mode == TrainMode::sga ? "sga" : "vidsgg"; }

TrainMode parse_train_mode(std::string_view name) {
  if (name == "vidsgg") return TrainMode::vidsgg;
  if (name == "sga") return TrainMode::sga;
  throw ConfigError("unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip norm must be >= 0");
  if (horizon < 1) throw ConfigError("anticipation horizon must be >= 1");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  weights.validate();
  schedule.validate();
}

namespace {

struct PairCache {
  const Vector* z = nullptr;
  HeadForward head;
};

struct VideoContext {
  const DatasetAnnotations& data;
  const FeatureSet& features;
  const MaskSet* masks;  // null: no masking
  const TrainConfig& config;
};

std::vector<std::uint8_t> pair_mask_bits(const MaskSet* masks, std::size_t video, std::size_t frame,
                                         const std::vector<int>& slots) {
  std::vector<std::uint8_t> bits(slots.size(), 0);
  if (!masks) return bits;
  const auto frame_bits = masks->frame_bits(video, frame);
  for (std::size_t i = 0; i < slots.size(); ++i) bits[i] = frame_bits[static_cast<std::size_t>(slots[i])];
  return bits;
}

int object_category(const FrameAnnotations& frame, ObjectId id) {
  const auto* object = frame.find_object(id);
  if (!object) throw ConsistencyError("relation references a missing object");
  return object->category;
}

// Observed-frame terms (masked predicate loss per pair, subject/object CE per pair).
std::vector<FrameTerms> observed_terms(const VideoContext& ctx, const ModelParams& params, std::size_t v,
                                       std::vector<PairCache>& caches) {
  const auto& video = ctx.data.videos[v];
  std::vector<FrameTerms> terms(video.frames.size());
  for (std::size_t f = 0; f < video.frames.size(); ++f) {
    const auto& frame = video.frames[f];
    const auto pairs = frame_pairs(frame);
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
      const Vector& z = ctx.features.videos[v][f][p];
      PairCache cache{&z, forward_head(params.observed, z)};
      const auto bits = pair_mask_bits(ctx.masks, v, f, pairs.slots[p]);
      terms[f].predicate.push_back(masked_predicate_loss(cache.head.scores, pairs.positives[p], bits));
      const auto logits = affine(params.object_w, params.object_b, z);
      terms[f].object.push_back(cross_entropy_logits_with_grad(logits, object_category(frame, pairs.pairs[p].first)));
      terms[f].object.push_back(cross_entropy_logits_with_grad(logits, object_category(frame, pairs.pairs[p].second)));
      caches.push_back(std::move(cache));
    }
  }
  return terms;
}

void backprop_observed(const ModelParams& params, const LossBreakdown& loss, const std::vector<PairCache>& caches,
                       ModelParams& grads) {
  for (std::size_t i = 0; i < caches.size(); ++i) {
    const Vector& z = *caches[i].z;
    backward_head(params.observed, caches[i].head, z, loss.gen_grads[i], grads.observed);
    for (std::size_t side = 0; side < 2; ++side) {
      const auto& g = loss.obj_grads[2 * i + side];
      for (std::size_t r = 0; r < g.size(); ++r) {
        grads.object_b[r] += g[r];
        for (std::size_t c = 0; c < z.size(); ++c) grads.object_w(r, c) += g[r] * z[c];
      }
    }
  }
}

void add_record(EpochRecord& record, const LossBreakdown& loss) {
  record.gen += loss.gen;
  record.obj += loss.obj;
  record.ant += loss.ant;
  record.boxes += loss.boxes;
  record.recon += loss.recon;
  record.total += loss.total;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "epoch", static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_index(i))]);
  }
  return order;
}

// One anticipated (future frame, pair) item and what its backward pass needs.
struct AnticipationItem {
  std::size_t rollout = 0;
  std::size_t step = 0;
  HeadForward head;
};

struct Rollout {
  Vector start;
  std::vector<Vector> states;
};

void sga_step(const VideoContext& ctx, const ModelParams& params, std::size_t v, ModelParams& grads,
              EpochRecord& record) {
  const auto& video = ctx.data.videos[v];
  const int num_frames = static_cast<int>(video.frames.size());

  std::vector<PairCache> caches;
  const auto observed = observed_terms(ctx, params, v, caches);

  std::vector<FramePairs> pairs_of(video.frames.size());
  for (std::size_t f = 0; f < video.frames.size(); ++f) pairs_of[f] = frame_pairs(video.frames[f]);

  std::vector<CutoffTerms> cutoffs;
  std::vector<Rollout> rollouts;
  std::vector<AnticipationItem> items;
  for (const auto& window : anticipation_windows(num_frames, ctx.config.horizon)) {
    CutoffTerms terms;
    terms.cutoff = window.cutoff;
    const auto last = static_cast<std::size_t>(window.cutoff - 1);
    const auto& last_pairs = pairs_of[last];
    for (std::size_t p = 0; p < last_pairs.pairs.size(); ++p) {
      const Vector& start = ctx.features.videos[v][last][p];
      Rollout rollout{start, anticipate(params, start, static_cast<int>(window.targets.size()))};
      const std::size_t rollout_index = rollouts.size();
      for (std::size_t s = 0; s < window.targets.size(); ++s) {
        const auto f = static_cast<std::size_t>(window.targets[s] - 1);
        const int q = pairs_of[f].find(last_pairs.pairs[p].first, last_pairs.pairs[p].second);
        if (q < 0) continue;
        const auto qi = static_cast<std::size_t>(q);
        const Vector& predicted = rollout.states[s];

        AnticipationItem item{rollout_index, s, forward_head(params.anticipated, predicted)};
        const auto bits = pair_mask_bits(ctx.masks, v, f, pairs_of[f].slots[qi]);
        terms.ant.push_back(masked_predicate_loss(item.head.scores, pairs_of[f].positives[qi], bits));

        auto recon = smooth_l1_with_grad(predicted, ctx.features.videos[v][f][qi]);
        const double scale = 1.0 / static_cast<double>(pairs_of[f].pairs.size());
        recon.value *= scale;
        for (auto& g : recon.grad) g *= scale;
        terms.recon.push_back(std::move(recon));

        const auto* object = video.frames[f].find_object(last_pairs.pairs[p].second);
        if (!object) throw ConsistencyError("anticipated pair references a missing object");
        const double target[4] = {object->box.x0, object->box.y0, object->box.x1, object->box.y1};
        terms.boxes.push_back(smooth_l1_with_grad(affine(params.box_w, params.box_b, predicted), target));
        items.push_back(std::move(item));
      }
      rollouts.push_back(std::move(rollout));
    }
    cutoffs.push_back(std::move(terms));
  }

  const auto loss = sga_objective(observed, cutoffs, num_frames, ctx.config.weights);
  add_record(record, loss);
  backprop_observed(params, loss, caches, grads);

  // d(loss)/d(state) per rollout step, then backpropagation through the recurrence.
  std::vector<std::vector<Vector>> state_grads(rollouts.size());
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    state_grads[r].assign(rollouts[r].states.size(), Vector(params.anticip_a.rows, 0.0));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const Vector& state = rollouts[item.rollout].states[item.step];
    auto& g = state_grads[item.rollout][item.step];
    const auto head_grad = backward_head(params.anticipated, item.head, state, loss.ant_grads[i], grads.anticipated);
    const auto& box_grad = loss.box_grads[i];
    for (std::size_t r = 0; r < 4; ++r) {
      grads.box_b[r] += box_grad[r];
      for (std::size_t c = 0; c < state.size(); ++c) {
        grads.box_w(r, c) += box_grad[r] * state[c];
        g[c] += params.box_w(r, c) * box_grad[r];
      }
    }
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += head_grad[c] + loss.recon_grads[i][c];
  }
  const std::size_t dim = params.anticip_a.rows;
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    auto& grads_r = state_grads[r];
    for (std::size_t s = grads_r.size(); s-- > 0;) {
      const Vector& previous = s == 0 ? rollouts[r].start : rollouts[r].states[s - 1];
      const Vector& g = grads_r[s];
      for (std::size_t i = 0; i < dim; ++i) {
        grads.anticip_c[i] += g[i];
        for (std::size_t j = 0; j < dim; ++j) grads.anticip_a(i, j) += g[i] * previous[j];
      }
      if (s == 0) break;
      auto& back = grads_r[s - 1];
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) back[j] += params.anticip_a(i, j) * g[i];
      }
    }
  }
}

void vidsgg_step(const VideoContext& ctx, const ModelParams& params, std::size_t v, ModelParams& grads,
                 EpochRecord& record) {
  std::vector<PairCache> caches;
  const auto terms = observed_terms(ctx, params, v, caches);
  const auto loss = vidsgg_objective(terms, ctx.config.weights);
  add_record(record, loss);
  backprop_observed(params, loss, caches, grads);
}

double gradient_norm(const ModelParams& grads) {
  double sum = 0.0;
  for_each_tensor(grads, [&](const char*, std::size_t, std::size_t, const std::vector<double>& data) {
    for (double g : data) sum += g * g;
  });
  return std::sqrt(sum);
}

TrainResult run_training(const DatasetAnnotations& data, const TrainConfig& config, TrainMode mode) {
  config.validate();
  ModelShape shape{config.features.dim, config.hidden, data.ontology.num_predicates(),
                   data.ontology.num_object_categories()};
  TrainResult result{init_params(shape, config.init_seed), {}};
  result.report.mode = mode;
  const auto features = generate_synthetic_video_batch(data, config.features, config.feature_seed);

  std::vector<std::size_t> usable;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    if (mode == TrainMode::sga && data.videos[v].frames.size() < 4) {
      ++result.report.skipped_videos;
      continue;
    }
    usable.push_back(v);
  }
  if (result.report.skipped_videos > 0) {
    std::cerr << "warning: skipped " << result.report.skipped_videos
              << " video(s) with fewer than 4 frames for anticipation training\n";
  }

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    MaskSet masks;
    const MaskSet* mask_ptr = nullptr;
    if (config.masking_enabled) {
      masks = generate_epoch_masks(epoch, config.schedule, data, config.mask_seed, config.mask_options);
      mask_ptr = &masks;
      record.mask_ratio = masks.ratio();
      record.masked_labels = masks.count_masked();
    }
    VideoContext ctx{data, features, mask_ptr, config};
    for (std::size_t i : epoch_order(usable.size(), config.order_seed, epoch)) {
      const std::size_t v = usable[i];
      auto grads = zeros_like(result.params);
      if (mode == TrainMode::sga) {
        sga_step(ctx, result.params, v, grads, record);
      } else {
        vidsgg_step(ctx, result.params, v, grads, record);
      }
      double step = config.learning_rate;
      if (config.clip_norm > 0.0) {
        const double norm = gradient_norm(grads);
        if (norm > config.clip_norm) step *= config.clip_norm / norm;
      }
      axpy(result.params, -step, grads);
    }
    result.report.epochs.push_back(record);
  }
  return result;
}

}  // namespace

TrainResult train_vidsgg(const DatasetAnnotations& data, const TrainConfig& config) {
  if (config.mode != TrainMode::vidsgg) throw ConfigError("train_vidsgg requires mode = vidsgg");
  return run_training(data, config, TrainMode::vidsgg);
}

TrainResult train_sga(const DatasetAnnotations& data, const TrainConfig& config) {
  if (config.mode != TrainMode::sga) throw ConfigError("train_sga requires mode = sga");
  return run_training(data, config, TrainMode::sga);
}

TrainResult train(const DatasetAnnotations& data, const TrainConfig& config) {
  return config.mode == TrainMode::sga ? train_sga(data, config) : train_vidsgg(data, config);
}

std::vector<ScoredFrame> score_observed(const ModelParams& params, const DatasetAnnotations& data,
                                        const FeatureSet& features) {
  std::vector<ScoredFrame> out;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    const auto& video = data.videos[v];
    for (std::size_t f = 0; f < video.frames.size(); ++f) {
      const auto pairs = frame_pairs(video.frames[f]);
      ScoredFrame scored;
      scored.ground_truth = video.frames[f];
      for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        scored.pairs.push_back({pairs.pairs[p].first, pairs.pairs[p].second,
                                forward_head(params.observed, features.videos[v][f][p]).scores});
      }
      out.push_back(std::move(scored));
    }
  }
  return out;
}

std::vector<ScoredFrame> score_anticipated(const ModelParams& params, const DatasetAnnotations& data,
                                           const FeatureSet& features, double observed_fraction) {
  std::vector<ScoredFrame> out;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    const auto& video = data.videos[v];
    const auto total = video.frames.size();
    const auto observed = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(observed_fraction * static_cast<double>(total))));
    if (observed >= total) continue;
    const std::size_t last = observed - 1;
    const auto last_pairs = frame_pairs(video.frames[last]);
    const int steps = static_cast<int>(total - observed);

    std::vector<std::vector<Vector>> rollouts;
    for (std::size_t p = 0; p < last_pairs.pairs.size(); ++p) {
      rollouts.push_back(anticipate(params, features.videos[v][last][p], steps));
    }
    for (int s = 0; s < steps; ++s) {
      ScoredFrame scored;
      scored.ground_truth = video.frames[observed + static_cast<std::size_t>(s)];
      for (std::size_t p = 0; p < last_pairs.pairs.size(); ++p) {
        scored.pairs.push_back({last_pairs.pairs[p].first, last_pairs.pairs[p].second,
                                forward_head(params.anticipated, rollouts[p][static_cast<std::size_t>(s)]).scores});
      }
      out.push_back(std::move(scored));
    }
  }
  return out;
}

MetricTable evaluate_model(const ModelParams& params, const DatasetAnnotations& data, const FeatureSet& features,
                           const EvalSpec& spec) {
  spec.validate();
  const auto frames = spec.observed_fraction ? score_anticipated(params, data, features, *spec.observed_fraction)
                                             : score_observed(params, data, features);
  return evaluate_frames(frames, data.ontology, spec);
}

}  // namespace tailmask
