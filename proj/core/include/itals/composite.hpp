#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "itals/model.hpp"
#include "itals/tensor.hpp"

namespace itals {

/// One independent two-axis model per state of a context axis.
/// A state without training cells has no model and scores 0 everywhere.
struct CompositeModel {
  TensorShape shape;  ///< the three-axis shape the composite was trained on
  std::size_t context_axis = 2;
  std::vector<std::optional<Model>> per_state;
  std::vector<IdMap> id_maps;
  TrainConfig config;
  std::map<std::string, std::string> metadata;

  std::size_t state_count() const noexcept { return per_state.size(); }
};

/// Two-axis tensor of the cells whose context coordinate is `state`.
/// User and item axes keep their relative order.
ObservationTensor context_slice(const ObservationTensor& obs, std::size_t context_axis,
                                EntityId state);

/// Requires a user x item x context tensor. Every sub-model shares `config`.
CompositeModel fit_ica(const ObservationTensor& obs, const TrainConfig& config);

double predict_ica(const CompositeModel& model, EntityId user, EntityId item, EntityId state);

}  // namespace itals
