#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "itals/events.hpp"
#include "itals/model.hpp"
#include "itals/tensor.hpp"

namespace itals {

inline constexpr Timestamp kSecondsPerDay = 86400;
inline constexpr Timestamp kSecondsPerWeek = 7 * kSecondsPerDay;

/// A recurring season cut into time bands. Band b covers
/// [boundaries[b], boundaries[b+1]) and the last band runs to season_length.
/// Timestamps are shifted by utc_offset before banding (no DST).
struct SeasonSpec {
  Timestamp season_length = kSecondsPerDay;
  std::vector<Timestamp> boundaries{0};
  Timestamp utc_offset = 0;

  static SeasonSpec uniform(Timestamp season_length, std::size_t bands, Timestamp utc_offset = 0);

  void validate() const;
  std::size_t band_count() const noexcept { return boundaries.size(); }
};

EntityId assign_time_band(Timestamp timestamp, const SeasonSpec& spec);

/// One state per event: the band of its timestamp.
ContextAssignment seasonal_context(const EventLog& events, const SeasonSpec& spec);

/// Context made of the categories of a user's most recent prior events.
/// The j-th most recent one gets weight decay^(j-1).
struct SequenceSpec {
  std::size_t history_depth = 1;
  double decay = 1.0;
  std::size_t category_count = 1;
  EntityId cold_state = 0;

  /// Spec with `real_categories` real states plus a trailing cold state.
  static SequenceSpec for_categories(std::size_t real_categories, std::size_t history_depth,
                                     double decay = 1.0);

  void validate() const;
};

/// Context states for a history given most recent first. Repeated categories
/// merge by summing weights, capped at 1. An empty history maps to the cold state.
ContextStates history_context(std::span<const EntityId> recent_categories, const SequenceSpec& spec);

/// Per-event context from each user's strictly earlier events.
/// Throws ShapeError naming the item when a category is missing.
ContextAssignment sequential_context(const EventLog& events,
                                     std::span<const std::optional<EntityId>> item_category,
                                     const SequenceSpec& spec);

/// Weighted average of the context feature vectors of `states` on `axis`.
Eigen::VectorXd resolve_context_vector(const Model& model, std::size_t axis,
                                       std::span<const StateWeight> states);

}  // namespace itals
