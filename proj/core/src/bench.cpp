#include "itals/bench.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include <Eigen/QR>

#include "itals/error.hpp"
#include "itals/solver.hpp"

namespace itals::bench {

ObservationTensor synthesize_tensor(const SynthSpec& spec) {
  TensorShape shape;
  shape.dims = spec.dims;
  for (std::size_t a = 0; a < spec.dims.size(); ++a) {
    shape.axis_roles.push_back(a == 0   ? std::string(kUserRole)
                               : a == 1 ? std::string(kItemRole)
                                        : "context" + std::to_string(a - 1));
  }
  shape.validate();
  const auto cells = shape.cell_count();
  if (!cells || *cells < spec.nnz) throw ShapeError("requested more cells than the shape holds");

  std::mt19937_64 gen(spec.seed);
  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  counts.reserve(spec.nnz * 2);
  std::vector<std::uint64_t> first_seen;
  first_seen.reserve(spec.nnz);
  while (first_seen.size() < spec.nnz) {
    std::uint64_t key = 0;
    for (auto d : spec.dims) key = key * d + gen() % d;
    if (counts[key]++ == 0) first_seen.push_back(key);
  }

  const std::size_t order = spec.dims.size();
  std::vector<EntityId> coords(spec.nnz * order);
  std::vector<double> weights(spec.nnz);
  for (std::size_t c = 0; c < spec.nnz; ++c) {
    std::uint64_t key = first_seen[c];
    for (std::size_t a = order; a-- > 0;) {
      coords[c * order + a] = static_cast<EntityId>(key % spec.dims[a]);
      key /= spec.dims[a];
    }
    weights[c] = 1.0 + spec.alpha * counts[first_seen[c]];
  }
  return ObservationTensor::from_cells(std::move(shape), std::move(coords), std::move(weights));
}

EpochTiming time_epochs(const ObservationTensor& obs, TrainConfig config, int repeats) {
  if (repeats < 1) throw ShapeError("need at least one timed epoch");
  config.epochs = repeats;
  EpochTiming timing;
  timing.features = config.features;
  timing.nnz = obs.nnz();
  fit(obs, config, [&](const EpochReport& r) { timing.runs.push_back(r.seconds); });
  auto sorted = timing.runs;
  std::sort(sorted.begin(), sorted.end());
  const auto mid = sorted.size() / 2;
  timing.median_seconds =
      sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return timing;
}

namespace {

double r_squared(std::span<const double> y, const Eigen::VectorXd& fitted) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - fitted[static_cast<Eigen::Index>(i)]) * (y[i] - fitted[static_cast<Eigen::Index>(i)]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  return ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

Eigen::VectorXd least_squares(std::span<const double> x, std::span<const double> y, int degree) {
  if (x.size() != y.size() || x.size() < static_cast<std::size_t>(degree + 1)) {
    throw ShapeError("regression needs at least degree + 1 paired samples");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, degree + 1);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d, p *= x[static_cast<std::size_t>(i)]) design(i, d) = p;
    rhs[i] = y[static_cast<std::size_t>(i)];
  }
  return design.colPivHouseholderQr().solve(rhs);
}

}  // namespace

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const auto coef = least_squares(x, y, 1);
  Eigen::VectorXd fitted(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) fitted[static_cast<Eigen::Index>(i)] = coef[0] + coef[1] * x[i];
  return {coef[1], coef[0], r_squared(y, fitted)};
}

QuadraticFit fit_quadratic(std::span<const double> x, std::span<const double> y) {
  const auto coef = least_squares(x, y, 2);
  Eigen::VectorXd fitted(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    fitted[static_cast<Eigen::Index>(i)] = coef[0] + coef[1] * x[i] + coef[2] * x[i] * x[i];
  }
  return {coef[0], coef[1], coef[2], r_squared(y, fitted)};
}

LinearFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size());
  std::vector<double> ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ShapeError("power-law fit needs positive samples");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly);
}

}  // namespace itals::bench
