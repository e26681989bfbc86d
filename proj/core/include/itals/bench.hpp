#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "itals/model.hpp"
#include "itals/tensor.hpp"

namespace itals::bench {

struct SynthSpec {
  std::vector<std::size_t> dims{2000, 1000, 20};
  std::size_t nnz = 10'000;
  double alpha = 100.0;
  std::uint64_t seed = 1;
};

/// Random tensor with coordinates drawn uniformly per axis until `nnz`
/// distinct cells exist. Repeated draws raise the cell weight.
ObservationTensor synthesize_tensor(const SynthSpec& spec);

struct EpochTiming {
  int features = 0;
  std::size_t nnz = 0;
  double median_seconds = 0.0;
  std::vector<double> runs;
};

/// Trains `repeats` epochs and reports the median epoch time.
EpochTiming time_epochs(const ObservationTensor& obs, TrainConfig config, int repeats);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct QuadraticFit {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double r2 = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);
QuadraticFit fit_quadratic(std::span<const double> x, std::span<const double> y);
/// Least-squares line through (log x, log y); slope is the exponent.
LinearFit fit_power_law(std::span<const double> x, std::span<const double> y);

}  // namespace itals::bench
