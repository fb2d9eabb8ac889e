#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tailmask/core_data.hpp"

namespace tailmask {

enum class ScheduleMode { linear, fixed };

/**
 * Masking-ratio schedule.
 *
 * linear: ratio(e) = min(e * sampling_ratio, max_ratio), epochs are 0-based so
 * epoch 0 is unmasked training. fixed: ratio(e) = fixed_ratio.
 */
struct MaskSchedule {
  ScheduleMode mode = ScheduleMode::fixed;
  double sampling_ratio = 0.0;
  double fixed_ratio = 0.0;
  double max_ratio = 1.0;

  static MaskSchedule linear(double sampling_ratio, double max_ratio = 1.0);
  static MaskSchedule fixed(double ratio);

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

/// Masking ratio for `epoch`, clamped to [0, 1].
double masking_ratio(int epoch, const MaskSchedule& schedule);

struct TargetCounts {
  std::vector<std::int64_t> per_class;
  std::int64_t n_target = 0;
};

/// Tar ~ Multinomial(n_target, probs). Throws ConfigError on negative or unnormalized probs.
TargetCounts sample_target_counts(std::int64_t n_target, std::span<const double> probs,
                                  std::uint64_t seed);

/// Address of one relation label: video ordinal in the dataset, frame index, slot.
struct LabelPosition {
  std::uint32_t video = 0;
  int frame = 0;
  int slot = 0;
  auto operator<=>(const LabelPosition&) const = default;
};

/// Per-class label positions, each list in (video, frame, slot) order.
struct PositionIndex {
  std::vector<std::vector<LabelPosition>> per_class;

  std::size_t total() const;
};

PositionIndex build_position_index(const DatasetAnnotations& data);

/**
 * Caps per-class counts at `capacity` and redistributes the overflow.
 *
 * Each round re-samples the overflow from a multinomial proportional to the
 * remaining capacity; after |classes| rounds any leftover is assigned
 * deterministically to the classes with the most remaining capacity.
 * The result satisfies result[c] <= capacity[c] and
 * sum(result) = min(sum(requested), sum(capacity)).
 */
std::vector<std::int64_t> redistribute_to_capacity(std::span<const std::int64_t> requested,
                                                   std::span<const std::int64_t> capacity,
                                                   std::uint64_t seed);

/// The kept (unmasked) label positions of one epoch, sorted.
struct FilteredDataset {
  std::vector<LabelPosition> kept;
  std::size_t masked = 0;

  bool contains(const LabelPosition& position) const;
};

/// Masks min(Tar[c], |P[c]|) uniformly chosen positions of every class (after
/// redistributing any surplus) and keeps the rest.
FilteredDataset build_filtered_dataset(const PositionIndex& index, const TargetCounts& targets,
                                       std::uint64_t seed);

/// Per-label mask bits for one epoch, aligned with the dataset layout.
class MaskSet {
 public:
  struct FrameMask {
    int frame_index = 0;
    std::vector<std::uint8_t> bits;  // indexed by slot
    bool operator==(const FrameMask&) const = default;
  };

  MaskSet() = default;
  MaskSet(int epoch, std::vector<std::vector<FrameMask>> videos)
      : epoch_(epoch), videos_(std::move(videos)) {}

  int epoch() const { return epoch_; }
  double ratio() const { return ratio_; }
  std::uint64_t seed() const { return seed_; }
  void set_provenance(double ratio, std::uint64_t seed) {
    ratio_ = ratio;
    seed_ = seed;
  }

  std::size_t num_videos() const { return videos_.size(); }
  /// Bits of frame ordinal `frame` of video ordinal `video`.
  std::span<const std::uint8_t> frame_bits(std::size_t video, std::size_t frame) const {
    return videos_[video][frame].bits;
  }
  const std::vector<FrameMask>& video(std::size_t video) const { return videos_[video]; }

  /// Bit at a label position; throws ConsistencyError if the position is unknown.
  std::uint8_t at(const LabelPosition& position) const;

  std::size_t count_masked() const;
  std::size_t size() const;

  bool operator==(const MaskSet&) const = default;

 private:
  int epoch_ = 0;
  double ratio_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<FrameMask>> videos_;
};

/// m = 0 for kept positions, 1 otherwise. Throws ConsistencyError when `filtered`
/// references a label that is not in `data`.
MaskSet build_masks(const DatasetAnnotations& data, const FilteredDataset& filtered, int epoch);

/**
 * How the multinomial target counts are interpreted by generate_epoch_masks.
 *
 * keep_balanced: Tar ~ Multinomial(N - N_target, Prob) is the per-class keep
 *   budget; every class keeps up to Tar[c] labels and the rest is masked. With
 *   uniform Prob the kept labels approach a uniform class distribution, which
 *   masks head classes and leaves tail classes mostly untouched.
 * mask_literal: Tar ~ Multinomial(N_target, Prob) is the per-class mask count.
 *
 * Both produce exactly min(N, round(N * ratio)) masked labels.
 */
enum class TargetMode { keep_balanced, mask_literal };

struct MaskGenOptions {
  TargetMode target_mode = TargetMode::keep_balanced;
  /// Per-class sampling probabilities; uniform when empty.
  std::vector<double> probs_override;
};

/// Full per-epoch pipeline: ratio -> target counts -> filtered dataset -> masks.
MaskSet generate_epoch_masks(int epoch, const MaskSchedule& schedule, const DatasetAnnotations& data,
                             std::uint64_t seed, const MaskGenOptions& options = {});

}  // namespace tailmask
