#include "itals/composite.hpp"

#include "itals/error.hpp"
#include "itals/solver.hpp"

namespace itals {

ObservationTensor context_slice(const ObservationTensor& obs, std::size_t context_axis,
                                EntityId state) {
  const auto& shape = obs.shape();
  if (context_axis >= shape.order() || shape.axis_roles[context_axis] == kUserRole ||
      shape.axis_roles[context_axis] == kItemRole) {
    throw ShapeError("slice axis is not a context axis");
  }
  if (shape.order() != 3) throw ShapeError("slicing needs a user x item x context tensor");
  if (state >= shape.dims[context_axis]) throw ShapeError("context state out of range");

  TensorShape sliced;
  std::vector<std::size_t> kept;
  for (std::size_t a = 0; a < shape.order(); ++a) {
    if (a == context_axis) continue;
    kept.push_back(a);
    sliced.dims.push_back(shape.dims[a]);
    sliced.axis_roles.push_back(shape.axis_roles[a]);
  }
  std::vector<EntityId> coords;
  std::vector<double> weights;
  for (auto cell : obs.cells_at(context_axis, state)) {
    const auto coord = obs.coord(cell);
    for (auto a : kept) coords.push_back(coord[a]);
    weights.push_back(obs.weight(cell));
  }
  return ObservationTensor::from_cells(std::move(sliced), std::move(coords), std::move(weights));
}

CompositeModel fit_ica(const ObservationTensor& obs, const TrainConfig& config) {
  config.validate();
  const auto ctx_axes = obs.shape().context_axes();
  if (obs.order() != 3 || ctx_axes.size() != 1) {
    throw ShapeError("iCA needs a user x item x context tensor");
  }
  CompositeModel composite;
  composite.shape = obs.shape();
  composite.context_axis = ctx_axes.front();
  composite.config = config;
  composite.id_maps.resize(obs.order());
  const std::size_t states = obs.shape().dims[composite.context_axis];
  composite.per_state.resize(states);
  for (std::size_t s = 0; s < states; ++s) {
    auto slice = context_slice(obs, composite.context_axis, static_cast<EntityId>(s));
    if (slice.empty()) continue;
    composite.per_state[s] = fit(slice, config);
  }
  return composite;
}

double predict_ica(const CompositeModel& model, EntityId user, EntityId item, EntityId state) {
  if (state >= model.state_count()) throw ShapeError("context state out of range");
  const auto& sub = model.per_state[state];
  if (!sub) return 0.0;
  std::vector<EntityId> coord(2);
  coord[sub->shape.user_axis()] = user;
  coord[sub->shape.item_axis()] = item;
  return predict_cell(*sub, coord);
}

}  // namespace itals
