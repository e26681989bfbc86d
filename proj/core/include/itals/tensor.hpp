#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itals/events.hpp"

namespace itals {

inline constexpr std::string_view kUserRole = "user";
inline constexpr std::string_view kItemRole = "item";

/// Axis sizes and their labels. Exactly one axis is "user" and one is
/// "item"; every other axis is a context dimension.
struct TensorShape {
  std::vector<std::size_t> dims;
  std::vector<std::string> axis_roles;

  void validate() const;
  std::size_t order() const noexcept { return dims.size(); }
  std::size_t user_axis() const;
  std::size_t item_axis() const;
  /// Axes other than user and item, in axis order.
  std::vector<std::size_t> context_axes() const;
  /// Product of the dims, or nullopt if it overflows.
  std::optional<std::size_t> cell_count() const;

  static TensorShape matrix(std::size_t users, std::size_t items);
  static TensorShape with_context(std::size_t users, std::size_t items, std::size_t states,
                                  std::string context_role = "context");

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// One context state and the relative weight (0, 1] of the event in it.
struct StateWeight {
  EntityId state = 0;
  double weight = 1.0;

  friend bool operator==(const StateWeight&, const StateWeight&) = default;
};
using ContextStates = std::vector<StateWeight>;
/// Per-event context states for one context axis, parallel to EventLog::events.
using ContextAssignment = std::vector<ContextStates>;

/// Cell weight = base + alpha * (sum of relative event weights in the cell).
struct WeightingScheme {
  double base = 1.0;
  double alpha = 100.0;

  void validate() const;
  double weight(double event_mass) const noexcept { return base + alpha * event_mass; }
};

/// Sparse binary tensor T with weights W, storing only the cells where T = 1.
///
/// Cells are kept in lexicographic coordinate order, which makes construction
/// deterministic and lets the per-axis indices be built with a counting sort.
/// Immutable once constructed.
class ObservationTensor {
 public:
  ObservationTensor() = default;

  /// Builds a tensor from explicit cells. `coords` is row-major, nnz x order.
  /// Throws ShapeError on out-of-range coordinates, duplicates or weights <= 1.
  static ObservationTensor from_cells(TensorShape shape, std::vector<EntityId> coords,
                                      std::vector<double> weights);

  const TensorShape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.order(); }
  std::size_t nnz() const noexcept { return weights_.size(); }
  bool empty() const noexcept { return weights_.empty(); }

  std::span<const EntityId> coord(std::size_t cell) const {
    return {coords_.data() + cell * order(), order()};
  }
  double weight(std::size_t cell) const { return weights_[cell]; }
  std::span<const double> weights() const noexcept { return weights_; }

  /// Number of stored cells whose `axis` coordinate is `index`.
  std::uint32_t support(std::size_t axis, std::size_t index) const {
    return static_cast<std::uint32_t>(offsets_[axis][index + 1] - offsets_[axis][index]);
  }
  std::vector<std::uint32_t> support(std::size_t axis) const;

  /// Ids of the cells whose `axis` coordinate equals `index`.
  std::span<const std::size_t> cells_at(std::size_t axis, std::size_t index) const {
    const auto& off = offsets_[axis];
    return {by_axis_[axis].data() + off[index], off[index + 1] - off[index]};
  }

  /// Index of the stored cell at `coord`, if any.
  std::optional<std::size_t> find(std::span<const EntityId> coord) const;

  friend bool operator==(const ObservationTensor& a, const ObservationTensor& b) {
    return a.shape_ == b.shape_ && a.coords_ == b.coords_ && a.weights_ == b.weights_;
  }

 private:
  void build_indices();

  TensorShape shape_;
  std::vector<EntityId> coords_;
  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> offsets_;
  std::vector<std::vector<std::size_t>> by_axis_;
};

/// Aggregates events into cells. `contexts` holds one assignment per context
/// axis of `shape` (in axis order); an event with several states on an axis
/// contributes to every combination, with the product of relative weights.
/// For a two-axis shape `contexts` is ignored.
ObservationTensor build_tensor(const EventLog& events, std::span<const ContextAssignment> contexts,
                               const TensorShape& shape, const WeightingScheme& scheme);

}  // namespace itals
