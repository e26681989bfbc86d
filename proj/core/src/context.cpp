#include "itals/context.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "itals/error.hpp"

namespace itals {

SeasonSpec SeasonSpec::uniform(Timestamp season_length, std::size_t bands, Timestamp utc_offset) {
  if (season_length <= 0 || bands == 0 || static_cast<Timestamp>(bands) > season_length) {
    throw ShapeError("uniform season needs 1 <= bands <= season_length");
  }
  SeasonSpec spec;
  spec.season_length = season_length;
  spec.utc_offset = utc_offset;
  spec.boundaries.resize(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    spec.boundaries[b] = static_cast<Timestamp>(b) * season_length / static_cast<Timestamp>(bands);
  }
  return spec;
}

void SeasonSpec::validate() const {
  if (season_length <= 0) throw ShapeError("season length must be positive");
  if (boundaries.empty() || boundaries.front() != 0) {
    throw ShapeError("band boundaries must start at 0");
  }
  for (std::size_t b = 1; b < boundaries.size(); ++b) {
    if (boundaries[b] <= boundaries[b - 1]) {
      throw ShapeError("band boundaries must be strictly increasing");
    }
  }
  if (boundaries.back() >= season_length) {
    throw ShapeError("band boundaries must lie below the season length");
  }
}

EntityId assign_time_band(Timestamp timestamp, const SeasonSpec& spec) {
  const Timestamp len = spec.season_length;
  Timestamp offset = (timestamp % len + spec.utc_offset % len) % len;
  if (offset < 0) offset += len;
  auto it = std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), offset);
  return static_cast<EntityId>(it - spec.boundaries.begin() - 1);
}

ContextAssignment seasonal_context(const EventLog& events, const SeasonSpec& spec) {
  spec.validate();
  ContextAssignment out;
  out.reserve(events.size());
  for (const auto& ev : events.events) out.push_back({{assign_time_band(ev.timestamp, spec), 1.0}});
  return out;
}

SequenceSpec SequenceSpec::for_categories(std::size_t real_categories, std::size_t history_depth,
                                          double decay) {
  SequenceSpec spec;
  spec.history_depth = history_depth;
  spec.decay = decay;
  spec.category_count = real_categories + 1;
  spec.cold_state = static_cast<EntityId>(real_categories);
  return spec;
}

void SequenceSpec::validate() const {
  if (history_depth < 1) throw ShapeError("history depth must be >= 1");
  if (!(decay > 0.0 && decay <= 1.0)) throw ShapeError("decay must be in (0, 1]");
  if (cold_state >= category_count) throw ShapeError("cold state outside the category axis");
}

ContextStates history_context(std::span<const EntityId> recent_categories, const SequenceSpec& spec) {
  if (recent_categories.empty()) return {{spec.cold_state, 1.0}};
  ContextStates states;
  double weight = 1.0;
  const std::size_t depth = std::min(spec.history_depth, recent_categories.size());
  for (std::size_t j = 0; j < depth; ++j, weight *= spec.decay) {
    const EntityId category = recent_categories[j];
    if (category >= spec.category_count || category == spec.cold_state) {
      throw ShapeError("category " + std::to_string(category) + " outside the context axis");
    }
    auto it = std::find_if(states.begin(), states.end(),
                           [&](const StateWeight& s) { return s.state == category; });
    if (it == states.end()) {
      states.push_back({category, weight});
    } else {
      it->weight = std::min(1.0, it->weight + weight);
    }
  }
  return states;
}

ContextAssignment sequential_context(const EventLog& events,
                                     std::span<const std::optional<EntityId>> item_category,
                                     const SequenceSpec& spec) {
  spec.validate();
  for (const auto& ev : events.events) {
    if (ev.item >= item_category.size() || !item_category[ev.item]) {
      const std::string name =
          ev.item < events.items.size() ? events.items.name(ev.item) : std::to_string(ev.item);
      throw ShapeError("no category for item '" + name + "'");
    }
  }

  std::vector<std::vector<std::size_t>> by_user(events.users.size());
  for (std::size_t e = 0; e < events.size(); ++e) by_user.at(events.events[e].user).push_back(e);

  ContextAssignment out(events.size());
  std::vector<EntityId> recent;
  for (auto& seq : by_user) {
    std::stable_sort(seq.begin(), seq.end(), [&](std::size_t a, std::size_t b) {
      return events.events[a].timestamp < events.events[b].timestamp;
    });
    std::size_t first_same = 0;  // first position sharing the current timestamp
    for (std::size_t p = 0; p < seq.size(); ++p) {
      const auto ts = events.events[seq[p]].timestamp;
      if (p > 0 && ts != events.events[seq[p - 1]].timestamp) first_same = p;
      recent.clear();
      for (std::size_t q = first_same; q > 0 && recent.size() < spec.history_depth; --q) {
        recent.push_back(*item_category[events.events[seq[q - 1]].item]);
      }
      out[seq[p]] = history_context(recent, spec);
    }
  }
  return out;
}

Eigen::VectorXd resolve_context_vector(const Model& model, std::size_t axis,
                                       std::span<const StateWeight> states) {
  if (states.empty()) throw ShapeError("context vector needs at least one state");
  if (axis >= model.order()) throw ShapeError("context axis out of range");
  const auto& factor = model.factors[axis];
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(factor.rows());
  double total = 0.0;
  for (const auto& sw : states) {
    if (sw.state >= factor.cols()) {
      throw ShapeError("context state " + std::to_string(sw.state) + " out of range on axis " +
                       std::to_string(axis));
    }
    if (!(sw.weight > 0.0)) throw ShapeError("context weights must be positive");
    sum += sw.weight * factor.col(sw.state);
    total += sw.weight;
  }
  if (states.size() == 1) return factor.col(states.front().state);
  return sum / total;
}

}  // namespace itals
