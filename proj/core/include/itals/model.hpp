#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "itals/events.hpp"
#include "itals/tensor.hpp"

namespace itals {

/// K x S matrix; column j is the feature vector of entity j.
using FactorMatrix = Eigen::MatrixXd;
/// K x K matrix M M^T of a factor matrix.
using GramMatrix = Eigen::MatrixXd;

enum class RegMode {
  constant,  ///< lambda for every column
  support,   ///< lambda times the number of stored cells of the column's entity
};

struct TrainConfig {
  int features = 20;
  int epochs = 10;
  double lambda = 0.01;
  RegMode reg_mode = RegMode::support;
  std::uint64_t seed = 42;
  /// Upper bound of the uniform initialisation; defaults to 1/sqrt(K).
  std::optional<double> init_scale;
  /// Worker threads for the column solves; 0 means the OpenMP default.
  int threads = 1;

  void validate() const;
  double resolved_init_scale() const;
};

std::string to_string(RegMode mode);
RegMode parse_reg_mode(std::string_view text);

struct Model {
  TensorShape shape;
  std::vector<FactorMatrix> factors;
  std::vector<GramMatrix> grams;
  TrainConfig config;
  /// One map per axis. Context axes may carry labels or stay empty.
  std::vector<IdMap> id_maps;
  /// Free-form key/value pairs persisted with the model (context spec etc).
  std::map<std::string, std::string> metadata;

  std::size_t order() const noexcept { return factors.size(); }
  Eigen::Index features() const noexcept { return factors.empty() ? 0 : factors.front().rows(); }

  void refresh_gram(std::size_t axis);
  void refresh_grams();
  /// Throws ShapeError if factor sizes disagree with the shape.
  void validate() const;
};

/// Seeded uniform (0, init_scale) factors for `shape`, with fresh grams.
Model init_model(const TensorShape& shape, const TrainConfig& config);

}  // namespace itals
