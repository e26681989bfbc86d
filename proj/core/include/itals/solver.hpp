#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "itals/model.hpp"
#include "itals/tensor.hpp"

namespace itals {

inline constexpr std::size_t kDenseOracleCap = 1'000'000;

/// Sum over k of the product of the factor entries at `coord`.
double predict_cell(const Model& model, std::span<const EntityId> coord);

/// Weighted squared error over every cell of the tensor, zeros included.
/// Enumerates all cells, so it refuses shapes larger than `cell_cap`.
double dense_loss(const Model& model, const ObservationTensor& obs,
                  std::size_t cell_cap = kDenseOracleCap);

/// Sum over axes and columns of effective_lambda * ||column||^2.
double regularization_penalty(const Model& model, const ObservationTensor& obs);

double effective_lambda(const TrainConfig& config, const ObservationTensor& obs, std::size_t axis,
                        std::size_t column);

/// Elementwise product of the grams of every axis except `axis`.
GramMatrix gram_hadamard_excluding(const Model& model, std::size_t axis);

/// Recomputes every column of factor `axis` by exact weighted least squares
/// with the other factors fixed, then refreshes that axis' gram.
/// Throws NumericalError when a system is singular (only possible with lambda = 0).
void solve_axis(Model& model, const ObservationTensor& obs, std::size_t axis);
void solve_axis(Model& model, const ObservationTensor& obs, std::size_t axis,
                std::span<const double> lambdas);

struct EpochReport {
  int epoch = 0;
  double seconds = 0.0;
  std::vector<double> axis_seconds;
};
using EpochCallback = std::function<void(const EpochReport&)>;

/// Runs config.epochs sweeps over the axes on an already initialised model.
void train(Model& model, const ObservationTensor& obs, const EpochCallback& on_epoch = {});

/// Random init followed by train(). Deterministic for a given seed.
Model fit(const ObservationTensor& obs, const TrainConfig& config,
          const EpochCallback& on_epoch = {});

}  // namespace itals
