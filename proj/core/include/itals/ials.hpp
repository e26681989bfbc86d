#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "itals/model.hpp"
#include "itals/tensor.hpp"

/// Standalone implicit-feedback matrix factorisation (Hu, Koren and Volinsky).
/// Kept as its own code path, in the classic row-embedding form, so the
/// two-axis tensor solver can be checked against it.
namespace itals::ials {

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Confidence matrix in CSR form for both orientations.
struct Interactions {
  std::size_t users = 0;
  std::size_t items = 0;
  std::vector<std::size_t> user_ptr;
  std::vector<EntityId> user_items;
  std::vector<double> user_confidence;
  std::vector<std::size_t> item_ptr;
  std::vector<EntityId> item_users;
  std::vector<double> item_confidence;

  /// Requires a two-axis tensor; cell weights become confidences.
  static Interactions from_tensor(const ObservationTensor& obs);
};

/// Row r of `users` / `items` is the embedding of entity r.
struct Factors {
  EmbeddingMatrix users;
  EmbeddingMatrix items;
};

/// Recomputes every user row, then every item row.
void run_epoch(Factors& factors, const Interactions& data, const TrainConfig& config);

Factors to_factors(const Model& model);
/// Writes the embeddings back into a two-axis model and refreshes its grams.
void assign(Model& model, const Factors& factors);

/// Same initialisation as the tensor solver, then config.epochs epochs.
Model fit(const ObservationTensor& obs, const TrainConfig& config);

}  // namespace itals::ials
