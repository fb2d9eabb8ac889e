#include "tailmask/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tailmask/error.hpp"
#include "tailmask/rng.hpp"

namespace tailmask {

MaskSchedule MaskSchedule::linear(double sampling_ratio, double max_ratio) {
  MaskSchedule s;
  s.mode = ScheduleMode::linear;
  s.sampling_ratio = sampling_ratio;
  s.max_ratio = max_ratio;
  return s;
}

MaskSchedule MaskSchedule::fixed(double ratio) {
  MaskSchedule s;
  s.mode = ScheduleMode::fixed;
  s.fixed_ratio = ratio;
  return s;
}

void MaskSchedule::validate() const {
  if (!(max_ratio >= 0.0 && max_ratio <= 1.0)) throw ConfigError("max_ratio must be in [0, 1]");
  if (mode == ScheduleMode::linear) {
    if (!(sampling_ratio > 0.0) || !std::isfinite(sampling_ratio)) {
      throw ConfigError("linear schedule needs sampling_ratio > 0");
    }
  } else if (!(fixed_ratio >= 0.0 && fixed_ratio <= 1.0)) {
    throw ConfigError("fixed masking ratio must be in [0, 1]");
  }
}

double masking_ratio(int epoch, const MaskSchedule& schedule) {
  if (schedule.mode == ScheduleMode::fixed) return std::clamp(schedule.fixed_ratio, 0.0, 1.0);
  const double ratio = static_cast<double>(std::max(epoch, 0)) * schedule.sampling_ratio;
  return std::clamp(std::min(ratio, schedule.max_ratio), 0.0, 1.0);
}

TargetCounts sample_target_counts(std::int64_t n_target, std::span<const double> probs, std::uint64_t seed) {
  if (n_target < 0) throw ConfigError("n_target must be >= 0");
  if (probs.empty()) throw ConfigError("empty class probability vector");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("class probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("class probabilities sum to " + std::to_string(total) + ", expected 1");
  }

  TargetCounts out;
  out.per_class.assign(probs.size(), 0);
  out.n_target = n_target;
  const auto cumulative = cumulative_weights(probs);
  Rng rng(seed);
  for (std::int64_t i = 0; i < n_target; ++i) ++out.per_class[rng.categorical(cumulative)];
  return out;
}

std::size_t PositionIndex::total() const {
  std::size_t n = 0;
  for (const auto& positions : per_class) n += positions.size();
  return n;
}

PositionIndex build_position_index(const DatasetAnnotations& data) {
  PositionIndex index;
  index.per_class.resize(data.ontology.num_predicates());
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    for (const auto& frame : data.videos[v].frames) {
      for (std::size_t i = 0; i < frame.relations.size(); ++i) {
        const auto id = static_cast<std::size_t>(frame.relations[i].predicate_id);
        index.per_class[id].push_back({static_cast<std::uint32_t>(v), frame.frame_index, static_cast<int>(i)});
      }
    }
  }
  return index;
}

std::vector<std::int64_t> redistribute_to_capacity(std::span<const std::int64_t> requested,
                                                   std::span<const std::int64_t> capacity,
                                                   std::uint64_t seed) {
  if (requested.size() != capacity.size()) throw ConsistencyError("target and capacity sizes differ");
  const std::size_t n = requested.size();
  std::vector<std::int64_t> result(n);
  std::int64_t surplus = 0;
  for (std::size_t c = 0; c < n; ++c) {
    result[c] = std::min(requested[c], capacity[c]);
    surplus += requested[c] - result[c];
  }

  Rng rng(seed);
  std::vector<double> remaining(n);
  for (std::size_t round = 0; round < n && surplus > 0; ++round) {
    std::int64_t total_remaining = 0;
    for (std::size_t c = 0; c < n; ++c) total_remaining += capacity[c] - result[c];
    if (total_remaining == 0) break;
    for (std::size_t c = 0; c < n; ++c) {
      remaining[c] = static_cast<double>(capacity[c] - result[c]) / static_cast<double>(total_remaining);
    }
    const auto cumulative = cumulative_weights(remaining);
    std::vector<std::int64_t> draws(n, 0);
    for (std::int64_t i = 0; i < surplus; ++i) ++draws[rng.categorical(cumulative)];
    surplus = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const std::int64_t add = std::min(draws[c], capacity[c] - result[c]);
      result[c] += add;
      surplus += draws[c] - add;
    }
  }

  if (surplus > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return capacity[a] - result[a] > capacity[b] - result[b];
    });
    for (std::size_t c : order) {
      if (surplus == 0) break;
      const std::int64_t add = std::min(surplus, capacity[c] - result[c]);
      result[c] += add;
      surplus -= add;
    }
  }
  return result;
}

bool FilteredDataset::contains(const LabelPosition& position) const {
  return std::binary_search(kept.begin(), kept.end(), position);
}

FilteredDataset build_filtered_dataset(const PositionIndex& index, const TargetCounts& targets,
                                       std::uint64_t seed) {
  if (targets.per_class.size() != index.per_class.size()) {
    throw ConsistencyError("target counts cover " + std::to_string(targets.per_class.size()) +
                           " classes, position index covers " + std::to_string(index.per_class.size()));
  }
  const std::size_t n = index.per_class.size();
  std::vector<std::int64_t> capacity(n);
  for (std::size_t c = 0; c < n; ++c) capacity[c] = static_cast<std::int64_t>(index.per_class[c].size());
  const auto to_mask = redistribute_to_capacity(targets.per_class, capacity, derive_seed(seed, "redistribute"));

  FilteredDataset out;
  for (std::size_t c = 0; c < n; ++c) {
    // One substream per class: the selection of one class never shifts another's.
    Rng rng(derive_seed(seed, "select", c));
    std::vector<LabelPosition> positions = index.per_class[c];
    const auto m = static_cast<std::size_t>(to_mask[c]);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(positions.size() - i));
      std::swap(positions[i], positions[j]);
    }
    out.kept.insert(out.kept.end(), positions.begin() + static_cast<std::ptrdiff_t>(m), positions.end());
    out.masked += m;
  }
  std::sort(out.kept.begin(), out.kept.end());
  return out;
}

namespace {

std::ptrdiff_t find_frame(const std::vector<MaskSet::FrameMask>& frames, int frame_index) {
  auto it = std::lower_bound(frames.begin(), frames.end(), frame_index,
                             [](const MaskSet::FrameMask& f, int t) { return f.frame_index < t; });
  if (it == frames.end() || it->frame_index != frame_index) return -1;
  return it - frames.begin();
}

std::string describe(const LabelPosition& p) {
  return "(video " + std::to_string(p.video) + ", frame " + std::to_string(p.frame) + ", slot " +
         std::to_string(p.slot) + ")";
}

}  // namespace

std::uint8_t MaskSet::at(const LabelPosition& position) const {
  if (position.video >= videos_.size()) throw ConsistencyError("mask has no label at " + describe(position));
  const auto& frames = videos_[position.video];
  const auto f = find_frame(frames, position.frame);
  if (f < 0 || position.slot < 0 ||
      static_cast<std::size_t>(position.slot) >= frames[static_cast<std::size_t>(f)].bits.size()) {
    throw ConsistencyError("mask has no label at " + describe(position));
  }
  return frames[static_cast<std::size_t>(f)].bits[static_cast<std::size_t>(position.slot)];
}

std::size_t MaskSet::count_masked() const {
  std::size_t n = 0;
  for (const auto& video : videos_) {
    for (const auto& frame : video) n += static_cast<std::size_t>(std::count(frame.bits.begin(), frame.bits.end(), 1));
  }
  return n;
}

std::size_t MaskSet::size() const {
  std::size_t n = 0;
  for (const auto& video : videos_) {
    for (const auto& frame : video) n += frame.bits.size();
  }
  return n;
}

MaskSet build_masks(const DatasetAnnotations& data, const FilteredDataset& filtered, int epoch) {
  std::vector<std::vector<MaskSet::FrameMask>> videos(data.videos.size());
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    for (const auto& frame : data.videos[v].frames) {
      videos[v].push_back({frame.frame_index, std::vector<std::uint8_t>(frame.relations.size(), 1)});
    }
  }
  for (const auto& position : filtered.kept) {
    if (position.video >= videos.size()) {
      throw ConsistencyError("filtered dataset references unknown label " + describe(position));
    }
    auto& frames = videos[position.video];
    const auto f = find_frame(frames, position.frame);
    if (f < 0 || position.slot < 0 ||
        static_cast<std::size_t>(position.slot) >= frames[static_cast<std::size_t>(f)].bits.size()) {
      throw ConsistencyError("filtered dataset references unknown label " + describe(position));
    }
    frames[static_cast<std::size_t>(f)].bits[static_cast<std::size_t>(position.slot)] = 0;
  }
  return MaskSet(epoch, std::move(videos));
}

MaskSet generate_epoch_masks(int epoch, const MaskSchedule& schedule, const DatasetAnnotations& data,
                             std::uint64_t seed, const MaskGenOptions& options) {
  schedule.validate();
  const double ratio = masking_ratio(epoch, schedule);
  const auto index = build_position_index(data);
  const auto n_classes = index.per_class.size();
  const auto n_labels = static_cast<std::int64_t>(index.total());
  const std::int64_t n_target =
      std::min(n_labels, static_cast<std::int64_t>(std::llround(static_cast<double>(n_labels) * ratio)));

  std::vector<double> probs = options.probs_override;
  if (probs.empty()) {
    probs.assign(n_classes, n_classes ? 1.0 / static_cast<double>(n_classes) : 0.0);
  } else if (probs.size() != n_classes) {
    throw ConfigError("probability override has " + std::to_string(probs.size()) + " entries, ontology has " +
                      std::to_string(n_classes) + " classes");
  }

  const std::uint64_t epoch_seed = derive_seed(seed, "epoch", static_cast<std::uint64_t>(epoch));
  TargetCounts targets;
  targets.per_class.assign(n_classes, 0);
  targets.n_target = n_target;
  if (n_labels > 0) {
    if (options.target_mode == TargetMode::mask_literal) {
      targets = sample_target_counts(n_target, probs, derive_seed(epoch_seed, "targets"));
    } else {
      const auto keep = sample_target_counts(n_labels - n_target, probs, derive_seed(epoch_seed, "targets"));
      std::vector<std::int64_t> capacity(n_classes);
      for (std::size_t c = 0; c < n_classes; ++c) capacity[c] = static_cast<std::int64_t>(index.per_class[c].size());
      const auto kept = redistribute_to_capacity(keep.per_class, capacity, derive_seed(epoch_seed, "keep"));
      for (std::size_t c = 0; c < n_classes; ++c) targets.per_class[c] = capacity[c] - kept[c];
    }
  }

  const auto filtered = build_filtered_dataset(index, targets, derive_seed(epoch_seed, "filter"));
  auto masks = build_masks(data, filtered, epoch);
  masks.set_provenance(ratio, seed);
  return masks;
}

}  // namespace tailmask
