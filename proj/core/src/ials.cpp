#include "itals/ials.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "itals/error.hpp"

namespace itals::ials {

namespace {

double lambda_for(const TrainConfig& config, std::size_t count) {
  if (config.reg_mode == RegMode::constant) return config.lambda;
  return config.lambda * static_cast<double>(count == 0 ? 1 : count);
}

// x_u = (Y^T Y + Y^T (C^u - I) Y + lambda I)^-1 Y^T C^u p(u), one row at a time.
void update_side(EmbeddingMatrix& solve_for, const EmbeddingMatrix& fixed,
                 const std::vector<std::size_t>& ptr, const std::vector<EntityId>& idx,
                 const std::vector<double>& confidence, const TrainConfig& config) {
  const Eigen::Index k = fixed.cols();
  const Eigen::MatrixXd yty = fixed.transpose() * fixed;
  for (Eigen::Index row = 0; row < solve_for.rows(); ++row) {
    const auto begin = ptr[static_cast<std::size_t>(row)];
    const auto end = ptr[static_cast<std::size_t>(row) + 1];
    Eigen::MatrixXd a = yty;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    for (auto p = begin; p < end; ++p) {
      const auto y = fixed.row(idx[p]).transpose();
      a.noalias() += (confidence[p] - 1.0) * (y * y.transpose());
      b.noalias() += confidence[p] * y;
    }
    const double lambda = lambda_for(config, end - begin);
    a.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    Eigen::VectorXd x;
    if (llt.info() == Eigen::Success) {
      x = llt.solve(b);
    } else if (lambda > 0.0) {
      x = a.ldlt().solve(b);
    }
    if (x.size() != k || !x.allFinite()) {
      throw NumericalError("iALS row " + std::to_string(row) + ": singular system; use lambda > 0");
    }
    solve_for.row(row) = x.transpose();
  }
}

void update_users(Factors& f, const Interactions& d, const TrainConfig& config) {
  update_side(f.users, f.items, d.user_ptr, d.user_items, d.user_confidence, config);
}

void update_items(Factors& f, const Interactions& d, const TrainConfig& config) {
  update_side(f.items, f.users, d.item_ptr, d.item_users, d.item_confidence, config);
}

}  // namespace

Interactions Interactions::from_tensor(const ObservationTensor& obs) {
  if (obs.order() != 2) throw ShapeError("iALS needs a two-axis tensor");
  const std::size_t ua = obs.shape().user_axis();
  const std::size_t ia = obs.shape().item_axis();
  Interactions d;
  d.users = obs.shape().dims[ua];
  d.items = obs.shape().dims[ia];

  auto build = [&](std::size_t row_axis, std::size_t col_axis, std::size_t rows,
                   std::vector<std::size_t>& ptr, std::vector<EntityId>& idx,
                   std::vector<double>& conf) {
    ptr.assign(rows + 1, 0);
    for (std::size_t c = 0; c < obs.nnz(); ++c) ++ptr[obs.coord(c)[row_axis] + 1];
    for (std::size_t r = 0; r < rows; ++r) ptr[r + 1] += ptr[r];
    idx.resize(obs.nnz());
    conf.resize(obs.nnz());
    auto cursor = ptr;
    for (std::size_t c = 0; c < obs.nnz(); ++c) {
      const auto coord = obs.coord(c);
      const auto slot = cursor[coord[row_axis]]++;
      idx[slot] = coord[col_axis];
      conf[slot] = obs.weight(c);
    }
  };
  build(ua, ia, d.users, d.user_ptr, d.user_items, d.user_confidence);
  build(ia, ua, d.items, d.item_ptr, d.item_users, d.item_confidence);
  return d;
}

void run_epoch(Factors& factors, const Interactions& data, const TrainConfig& config) {
  update_users(factors, data, config);
  update_items(factors, data, config);
}

Factors to_factors(const Model& model) {
  if (model.order() != 2) throw ShapeError("iALS factors need a two-axis model");
  Factors f;
  f.users = model.factors[model.shape.user_axis()].transpose();
  f.items = model.factors[model.shape.item_axis()].transpose();
  return f;
}

void assign(Model& model, const Factors& factors) {
  if (model.order() != 2) throw ShapeError("iALS factors need a two-axis model");
  model.factors[model.shape.user_axis()] = factors.users.transpose();
  model.factors[model.shape.item_axis()] = factors.items.transpose();
  model.refresh_grams();
}

Model fit(const ObservationTensor& obs, const TrainConfig& config) {
  config.validate();
  if (obs.empty()) throw Error("cannot fit an empty tensor");
  Model model = init_model(obs.shape(), config);
  const auto data = Interactions::from_tensor(obs);
  Factors factors = to_factors(model);
  // Sweep in axis order so the result lines up with the tensor solver.
  const bool users_first = model.shape.user_axis() == 0;
  for (int e = 0; e < config.epochs; ++e) {
    if (users_first) {
      update_users(factors, data, config);
      update_items(factors, data, config);
    } else {
      update_items(factors, data, config);
      update_users(factors, data, config);
    }
  }
  assign(model, factors);
  return model;
}

}  // namespace itals::ials
