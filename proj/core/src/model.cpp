#include "itals/model.hpp"

#include <cmath>
#include <random>

#include "itals/error.hpp"

namespace itals {

void TrainConfig::validate() const {
  if (features < 1) throw ShapeError("K must be >= 1");
  if (epochs < 1) throw ShapeError("epochs must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ShapeError("lambda must be finite and >= 0");
  if (init_scale && !(*init_scale > 0.0 && std::isfinite(*init_scale))) {
    throw ShapeError("init_scale must be positive");
  }
  if (threads < 0) throw ShapeError("threads must be >= 0");
}

double TrainConfig::resolved_init_scale() const {
  return init_scale.value_or(1.0 / std::sqrt(static_cast<double>(features)));
}

std::string to_string(RegMode mode) {
  return mode == RegMode::constant ? "constant" : "support";
}

RegMode parse_reg_mode(std::string_view text) {
  if (text == "constant") return RegMode::constant;
  if (text == "support" || text == "support-proportional") return RegMode::support;
  throw ShapeError("unknown regularisation mode '" + std::string(text) + "'");
}

void Model::refresh_gram(std::size_t axis) {
  const auto& m = factors.at(axis);
  GramMatrix g = GramMatrix::Zero(m.rows(), m.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(m);
  grams.at(axis) = g.selfadjointView<Eigen::Lower>();
}

void Model::refresh_grams() {
  grams.resize(factors.size());
  for (std::size_t a = 0; a < factors.size(); ++a) refresh_gram(a);
}

void Model::validate() const {
  shape.validate();
  if (factors.size() != shape.order()) throw ShapeError("model has wrong number of factors");
  for (std::size_t a = 0; a < factors.size(); ++a) {
    if (factors[a].rows() != features() ||
        factors[a].cols() != static_cast<Eigen::Index>(shape.dims[a])) {
      throw ShapeError("factor " + std::to_string(a) + " has wrong dimensions");
    }
    if (!factors[a].allFinite()) throw ShapeError("factor " + std::to_string(a) + " is not finite");
  }
  if (grams.size() != factors.size()) throw ShapeError("gram cache out of date");
  if (!id_maps.empty() && id_maps.size() != factors.size()) {
    throw ShapeError("model needs one id map per axis");
  }
}

Model init_model(const TensorShape& shape, const TrainConfig& config) {
  shape.validate();
  config.validate();
  Model model;
  model.shape = shape;
  model.config = config;
  model.id_maps.resize(shape.order());
  const double scale = config.resolved_init_scale();
  std::mt19937_64 gen(config.seed);
  // Open interval (0, scale) from the top 53 bits; independent of the
  // standard library's distribution implementation.
  auto draw = [&] { return scale * (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
  for (auto dim : shape.dims) {
    FactorMatrix m(config.features, static_cast<Eigen::Index>(dim));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index k = 0; k < m.rows(); ++k) m(k, j) = draw();
    }
    model.factors.push_back(std::move(m));
  }
  model.refresh_grams();
  return model;
}

}  // namespace itals
