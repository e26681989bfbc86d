#include "itals/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "itals/error.hpp"

namespace itals {

namespace {

std::string axis_label(const TensorShape& shape, std::size_t axis) {
  return "axis " + std::to_string(axis) + " ('" + shape.axis_roles[axis] + "')";
}

void check_in_range(const TensorShape& shape, std::size_t axis, std::size_t index) {
  if (index >= shape.dims[axis]) {
    throw ShapeError(axis_label(shape, axis) + ": index " + std::to_string(index) +
                     " out of range [0, " + std::to_string(shape.dims[axis]) + ")");
  }
}

}  // namespace

void TensorShape::validate() const {
  if (dims.size() < 2) throw ShapeError("tensor needs at least 2 axes");
  if (axis_roles.size() != dims.size()) throw ShapeError("axis_roles and dims differ in length");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == 0) throw ShapeError("axis " + std::to_string(i) + " has size 0");
    if (dims[i] > std::numeric_limits<EntityId>::max()) {
      throw ShapeError("axis " + std::to_string(i) + " too large");
    }
  }
  if (std::count(axis_roles.begin(), axis_roles.end(), kUserRole) != 1 ||
      std::count(axis_roles.begin(), axis_roles.end(), kItemRole) != 1) {
    throw ShapeError("shape needs exactly one 'user' and one 'item' axis");
  }
}

std::size_t TensorShape::user_axis() const {
  auto it = std::find(axis_roles.begin(), axis_roles.end(), kUserRole);
  if (it == axis_roles.end()) throw ShapeError("shape has no user axis");
  return static_cast<std::size_t>(it - axis_roles.begin());
}

std::size_t TensorShape::item_axis() const {
  auto it = std::find(axis_roles.begin(), axis_roles.end(), kItemRole);
  if (it == axis_roles.end()) throw ShapeError("shape has no item axis");
  return static_cast<std::size_t>(it - axis_roles.begin());
}

std::vector<std::size_t> TensorShape::context_axes() const {
  std::vector<std::size_t> axes;
  for (std::size_t i = 0; i < axis_roles.size(); ++i) {
    if (axis_roles[i] != kUserRole && axis_roles[i] != kItemRole) axes.push_back(i);
  }
  return axes;
}

std::optional<std::size_t> TensorShape::cell_count() const {
  std::size_t total = 1;
  for (auto d : dims) {
    if (d != 0 && total > std::numeric_limits<std::size_t>::max() / d) return std::nullopt;
    total *= d;
  }
  return total;
}

TensorShape TensorShape::matrix(std::size_t users, std::size_t items) {
  return {{users, items}, {std::string(kUserRole), std::string(kItemRole)}};
}

TensorShape TensorShape::with_context(std::size_t users, std::size_t items, std::size_t states,
                                      std::string context_role) {
  return {{users, items, states},
          {std::string(kUserRole), std::string(kItemRole), std::move(context_role)}};
}

void WeightingScheme::validate() const {
  if (!std::isfinite(base) || !std::isfinite(alpha) || alpha < 0.0) {
    throw ShapeError("weighting: alpha must be finite and >= 0");
  }
  if (!(base + alpha > 1.0)) throw ShapeError("weighting: need base + alpha > 1");
}

ObservationTensor ObservationTensor::from_cells(TensorShape shape, std::vector<EntityId> coords,
                                                std::vector<double> weights) {
  shape.validate();
  const std::size_t order = shape.order();
  if (coords.size() != weights.size() * order) {
    throw ShapeError("coordinate array does not match weight count");
  }
  const std::size_t nnz = weights.size();
  for (std::size_t c = 0; c < nnz; ++c) {
    if (!(weights[c] > 1.0) || !std::isfinite(weights[c])) {
      throw ShapeError("cell " + std::to_string(c) + ": weight must be finite and > 1");
    }
    for (std::size_t a = 0; a < order; ++a) check_in_range(shape, a, coords[c * order + a]);
  }

  std::vector<std::size_t> perm(nnz);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto less = [&](std::size_t x, std::size_t y) {
    return std::lexicographical_compare(coords.begin() + x * order, coords.begin() + (x + 1) * order,
                                        coords.begin() + y * order, coords.begin() + (y + 1) * order);
  };
  std::stable_sort(perm.begin(), perm.end(), less);

  ObservationTensor t;
  t.shape_ = std::move(shape);
  t.coords_.resize(coords.size());
  t.weights_.resize(nnz);
  for (std::size_t c = 0; c < nnz; ++c) {
    std::copy_n(coords.begin() + perm[c] * order, order, t.coords_.begin() + c * order);
    t.weights_[c] = weights[perm[c]];
    if (c > 0 && std::equal(t.coords_.begin() + (c - 1) * order, t.coords_.begin() + c * order,
                            t.coords_.begin() + c * order)) {
      throw ShapeError("duplicate cell coordinate");
    }
  }
  t.build_indices();
  return t;
}

void ObservationTensor::build_indices() {
  const std::size_t order = shape_.order();
  offsets_.assign(order, {});
  by_axis_.assign(order, {});
  for (std::size_t a = 0; a < order; ++a) {
    auto& off = offsets_[a];
    off.assign(shape_.dims[a] + 1, 0);
    for (std::size_t c = 0; c < nnz(); ++c) ++off[coords_[c * order + a] + 1];
    std::partial_sum(off.begin(), off.end(), off.begin());
    auto cursor = off;
    auto& ids = by_axis_[a];
    ids.resize(nnz());
    for (std::size_t c = 0; c < nnz(); ++c) ids[cursor[coords_[c * order + a]]++] = c;
  }
}

std::vector<std::uint32_t> ObservationTensor::support(std::size_t axis) const {
  std::vector<std::uint32_t> out(shape_.dims.at(axis));
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = support(axis, j);
  return out;
}

std::optional<std::size_t> ObservationTensor::find(std::span<const EntityId> coord) const {
  const std::size_t order = shape_.order();
  if (coord.size() != order) return std::nullopt;
  std::size_t lo = 0;
  std::size_t hi = nnz();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    auto cell = this->coord(mid);
    if (std::lexicographical_compare(cell.begin(), cell.end(), coord.begin(), coord.end())) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < nnz() && std::ranges::equal(this->coord(lo), coord)) return lo;
  return std::nullopt;
}

ObservationTensor build_tensor(const EventLog& events, std::span<const ContextAssignment> contexts,
                               const TensorShape& shape, const WeightingScheme& scheme) {
  shape.validate();
  scheme.validate();
  const std::size_t order = shape.order();
  const std::size_t user_axis = shape.user_axis();
  const std::size_t item_axis = shape.item_axis();
  const auto ctx_axes = shape.context_axes();
  if (contexts.size() < ctx_axes.size()) {
    throw ShapeError("missing context assignment: shape has " + std::to_string(ctx_axes.size()) +
                     " context axes, got " + std::to_string(contexts.size()));
  }
  for (const auto& assignment : contexts.first(ctx_axes.size())) {
    if (assignment.size() != events.size()) {
      throw ShapeError("context assignment length differs from event count");
    }
  }

  // Expand every event into (coordinate, mass) contributions.
  std::vector<EntityId> coords;
  std::vector<double> masses;
  std::vector<EntityId> coord(order);
  for (std::size_t e = 0; e < events.size(); ++e) {
    const auto& ev = events.events[e];
    check_in_range(shape, user_axis, ev.user);
    check_in_range(shape, item_axis, ev.item);
    coord[user_axis] = ev.user;
    coord[item_axis] = ev.item;

    // Odometer over the state lists of the context axes.
    std::vector<std::size_t> pick(ctx_axes.size(), 0);
    for (std::size_t c = 0; c < ctx_axes.size(); ++c) {
      const auto& states = contexts[c][e];
      if (states.empty()) {
        throw ShapeError(axis_label(shape, ctx_axes[c]) + ": event " + std::to_string(e) +
                         " has no context state");
      }
      for (const auto& sw : states) {
        check_in_range(shape, ctx_axes[c], sw.state);
        if (!(sw.weight > 0.0 && sw.weight <= 1.0)) {
          throw ShapeError(axis_label(shape, ctx_axes[c]) + ": relative weight must be in (0, 1]");
        }
      }
    }
    while (true) {
      double mass = 1.0;
      for (std::size_t c = 0; c < ctx_axes.size(); ++c) {
        const auto& sw = contexts[c][e][pick[c]];
        coord[ctx_axes[c]] = sw.state;
        mass *= sw.weight;
      }
      coords.insert(coords.end(), coord.begin(), coord.end());
      masses.push_back(mass);
      std::size_t c = 0;
      for (; c < ctx_axes.size(); ++c) {
        if (++pick[c] < contexts[c][e].size()) break;
        pick[c] = 0;
      }
      if (c == ctx_axes.size()) break;
    }
  }

  // Merge contributions sharing a coordinate; stable order keeps sums reproducible.
  std::vector<std::size_t> perm(masses.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) {
    return std::lexicographical_compare(coords.begin() + x * order, coords.begin() + (x + 1) * order,
                                        coords.begin() + y * order, coords.begin() + (y + 1) * order);
  });
  std::vector<EntityId> cell_coords;
  std::vector<double> cell_mass;
  for (std::size_t p = 0; p < perm.size(); ++p) {
    const auto src = coords.begin() + perm[p] * order;
    if (!cell_mass.empty() && std::equal(src, src + order, cell_coords.end() - order)) {
      cell_mass.back() += masses[perm[p]];
    } else {
      cell_coords.insert(cell_coords.end(), src, src + order);
      cell_mass.push_back(masses[perm[p]]);
    }
  }
  std::vector<double> weights(cell_mass.size());
  std::transform(cell_mass.begin(), cell_mass.end(), weights.begin(),
                 [&](double m) { return scheme.weight(m); });
  for (double w : weights) {
    if (!(w > 1.0)) throw ShapeError("weighting produced a cell weight <= 1; raise base or alpha");
  }
  return ObservationTensor::from_cells(shape, std::move(cell_coords), std::move(weights));
}

}  // namespace itals
