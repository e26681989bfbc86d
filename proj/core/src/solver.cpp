#include "itals/solver.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>

#include <Eigen/Cholesky>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "itals/error.hpp"

namespace itals {

namespace {

// Cells folded into one symmetric rank-k update.
constexpr Eigen::Index kBatch = 64;

int worker_count(int requested) {
#ifdef _OPENMP
  return requested > 0 ? requested : omp_get_max_threads();
#else
  (void)requested;
  return 1;
#endif
}

void check_compatible(const Model& model, const ObservationTensor& obs) {
  if (model.shape.dims != obs.shape().dims) {
    throw ShapeError("model and tensor shapes differ");
  }
  if (model.factors.size() != obs.order() || model.grams.size() != obs.order()) {
    throw ShapeError("model factors do not match the tensor order");
  }
}

std::vector<double> column_lambdas(const TrainConfig& config, const ObservationTensor& obs,
                                   std::size_t axis) {
  std::vector<double> out(obs.shape().dims[axis]);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = effective_lambda(config, obs, axis, j);
  return out;
}

// Solves (A + lambda I) x = b for symmetric PSD A given in the lower triangle.
Eigen::VectorXd solve_column(Eigen::MatrixXd& a, const Eigen::VectorXd& b, double lambda,
                             std::size_t axis, std::size_t column) {
  a.diagonal().array() += lambda;
  auto fail = [&](const char* what) {
    return NumericalError("axis " + std::to_string(axis) + " column " + std::to_string(column) +
                          ": " + what + (lambda == 0.0 ? "; use lambda > 0" : ""));
  };
  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(a);
  if (llt.info() == Eigen::Success && !(lambda == 0.0 && llt.rcond() < 1e-13)) {
    Eigen::VectorXd x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  if (lambda == 0.0) throw fail("singular system");
  Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw fail("factorisation failed");
  Eigen::VectorXd x = ldlt.solve(b);
  if (!x.allFinite()) throw fail("non-finite solution");
  return x;
}

}  // namespace

double predict_cell(const Model& model, std::span<const EntityId> coord) {
  if (coord.size() != model.order()) throw ShapeError("coordinate has wrong length");
  Eigen::VectorXd prod = Eigen::VectorXd::Ones(model.features());
  for (std::size_t a = 0; a < coord.size(); ++a) {
    if (coord[a] >= model.factors[a].cols()) {
      throw ShapeError("coordinate out of bounds on axis " + std::to_string(a));
    }
    prod.array() *= model.factors[a].col(coord[a]).array();
  }
  return prod.sum();
}

double dense_loss(const Model& model, const ObservationTensor& obs, std::size_t cell_cap) {
  check_compatible(model, obs);
  const auto cells = obs.shape().cell_count();
  if (!cells || *cells > cell_cap) {
    throw OracleLimitError("dense loss enumerates every cell; shape exceeds the cap of " +
                           std::to_string(cell_cap));
  }
  const auto& dims = obs.shape().dims;
  std::vector<EntityId> coord(dims.size(), 0);
  std::size_t next_stored = 0;  // stored cells are in the same lexicographic order
  double loss = 0.0;
  for (std::size_t n = 0; n < *cells; ++n) {
    const double pred = predict_cell(model, coord);
    if (next_stored < obs.nnz() && std::ranges::equal(obs.coord(next_stored), coord)) {
      const double r = 1.0 - pred;
      loss += obs.weight(next_stored) * r * r;
      ++next_stored;
    } else {
      loss += pred * pred;
    }
    for (std::size_t a = dims.size(); a-- > 0;) {
      if (++coord[a] < dims[a]) break;
      coord[a] = 0;
    }
  }
  return loss;
}

double regularization_penalty(const Model& model, const ObservationTensor& obs) {
  check_compatible(model, obs);
  double total = 0.0;
  for (std::size_t a = 0; a < model.order(); ++a) {
    for (Eigen::Index j = 0; j < model.factors[a].cols(); ++j) {
      total += effective_lambda(model.config, obs, a, static_cast<std::size_t>(j)) *
               model.factors[a].col(j).squaredNorm();
    }
  }
  return total;
}

double effective_lambda(const TrainConfig& config, const ObservationTensor& obs, std::size_t axis,
                        std::size_t column) {
  if (config.reg_mode == RegMode::constant) return config.lambda;
  const auto support = obs.support(axis, column);
  return config.lambda * static_cast<double>(support == 0 ? 1u : support);
}

GramMatrix gram_hadamard_excluding(const Model& model, std::size_t axis) {
  const Eigen::Index k = model.features();
  GramMatrix c = GramMatrix::Ones(k, k);
  for (std::size_t a = 0; a < model.order(); ++a) {
    if (a != axis) c.array() *= model.grams[a].array();
  }
  return c;
}

void solve_axis(Model& model, const ObservationTensor& obs, std::size_t axis) {
  const auto lambdas = column_lambdas(model.config, obs, axis);
  solve_axis(model, obs, axis, lambdas);
}

void solve_axis(Model& model, const ObservationTensor& obs, std::size_t axis,
                std::span<const double> lambdas) {
  check_compatible(model, obs);
  if (axis >= model.order()) throw ShapeError("axis out of range");
  const auto columns = static_cast<std::int64_t>(obs.shape().dims[axis]);
  if (lambdas.size() != static_cast<std::size_t>(columns)) {
    throw ShapeError("need one lambda per column");
  }

  const Eigen::Index k = model.features();
  const std::size_t order = model.order();
  const GramMatrix shared = gram_hadamard_excluding(model, axis);
  FactorMatrix& target = model.factors[axis];

  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::int64_t first_error_column = columns;

  const int workers = worker_count(model.config.threads);
#pragma omp parallel for schedule(dynamic, 8) num_threads(workers) if (workers > 1)
  for (std::int64_t j = 0; j < columns; ++j) {
    try {
      Eigen::MatrixXd a = shared;
      Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
      Eigen::MatrixXd batch(k, kBatch);
      Eigen::VectorXd v(k);
      Eigen::Index filled = 0;
      auto selfadjoint = a.selfadjointView<Eigen::Lower>();
      for (auto cell : obs.cells_at(axis, static_cast<std::size_t>(j))) {
        const auto coord = obs.coord(cell);
        double* out = v.data();
        bool first = true;
        for (std::size_t other = 0; other < order; ++other) {
          if (other == axis) continue;
          const double* col = model.factors[other].data() + static_cast<Eigen::Index>(coord[other]) * k;
          if (first) {
            std::copy(col, col + k, out);
            first = false;
          } else {
            for (Eigen::Index f = 0; f < k; ++f) out[f] *= col[f];
          }
        }
        const double w = obs.weight(cell);
        b.noalias() += w * v;
        // The zero cells already sit in `shared` with weight 1, so only the
        // excess w - 1 of a stored cell goes into the left-hand side.
        batch.col(filled++) = std::sqrt(w - 1.0) * v;
        if (filled == kBatch) {
          selfadjoint.rankUpdate(batch);
          filled = 0;
        }
      }
      if (filled > 0) selfadjoint.rankUpdate(batch.leftCols(filled));
      target.col(j) = solve_column(a, b, lambdas[static_cast<std::size_t>(j)], axis,
                                   static_cast<std::size_t>(j));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (j < first_error_column) {
        first_error_column = j;
        first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  model.refresh_gram(axis);
}

void train(Model& model, const ObservationTensor& obs, const EpochCallback& on_epoch) {
  model.config.validate();
  check_compatible(model, obs);
  std::vector<std::vector<double>> lambdas;
  for (std::size_t a = 0; a < model.order(); ++a) {
    lambdas.push_back(column_lambdas(model.config, obs, a));
  }
  using clock = std::chrono::steady_clock;
  for (int e = 1; e <= model.config.epochs; ++e) {
    EpochReport report;
    report.epoch = e;
    const auto epoch_start = clock::now();
    for (std::size_t a = 0; a < model.order(); ++a) {
      const auto start = clock::now();
      solve_axis(model, obs, a, lambdas[a]);
      report.axis_seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
    }
    report.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
    if (on_epoch) on_epoch(report);
  }
}

Model fit(const ObservationTensor& obs, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (obs.empty()) throw Error("cannot fit an empty tensor");
  Model model = init_model(obs.shape(), config);
  train(model, obs, on_epoch);
  return model;
}

}  // namespace itals
