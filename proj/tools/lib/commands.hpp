#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "context_spec.hpp"
#include "itals/composite.hpp"
#include "itals/eval.hpp"
#include "itals/model.hpp"
#include "itals/model_io.hpp"
#include "itals/solver.hpp"

namespace itals::cli {

namespace fs = std::filesystem;

/// Installs a stderr logger; level from ITALS_LOG (trace..off, default info).
void setup_logging();

// prepare

enum class InputFormat { events, ratings };

struct PrepareOptions {
  fs::path input;
  InputFormat format = InputFormat::events;
  std::optional<double> threshold;  ///< ratings only; default keeps everything
  fs::path output;
  std::optional<Timestamp> split_timestamp;
  std::optional<double> split_quantile;
  std::optional<Timestamp> horizon;
  std::optional<fs::path> train_output;
  std::optional<fs::path> test_output;
};

struct PrepareReport {
  std::size_t events = 0;
  std::size_t users = 0;
  std::size_t items = 0;
  std::optional<Timestamp> split_timestamp;
  std::size_t train_events = 0;
  std::size_t test_events = 0;
};

EventLog prepare_events(std::istream& in, InputFormat format, std::optional<double> threshold,
                        std::string_view source = "<stream>");

/// Writes the canonical event file plus `<output>.users` and `<output>.items`
/// id maps (one name per line, in id order), and optionally a date split.
PrepareReport cmd_prepare(const PrepareOptions& options);

// train

enum class Algorithm { itals, ials, ica };

std::string to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view text);

struct TrainOptions {
  std::string context = "none";
  Timestamp utc_offset = 0;
  std::optional<fs::path> category_map;
  Algorithm algo = Algorithm::itals;
  TrainConfig config;
  WeightingScheme scheme;
};

/// Either a single tensor model or an iCA composite.
struct TrainedModel {
  std::optional<Model> single;
  std::optional<CompositeModel> composite;

  const std::map<std::string, std::string>& metadata() const;
  const std::vector<IdMap>& id_maps() const;
  ModelKind kind() const noexcept { return single ? ModelKind::single : ModelKind::composite; }
};

TrainedModel train_model(const EventLog& train, const TrainOptions& options,
                         const EpochCallback& on_epoch = {});

void save(const TrainedModel& model, const fs::path& path);
TrainedModel load(const fs::path& path);

// eval

struct EvalRequest {
  EvalOptions options;
  bool exclude_seen = false;
  std::optional<fs::path> category_map;
};

/// `train` feeds sequence histories and --exclude-seen; it may be null.
EvalResult evaluate(const TrainedModel& model, const EventLog& test, const EventLog* train,
                    const EvalRequest& request);

/// Headline line printed by `itals eval`: recall and precision at
/// min(20, n_max) plus query counts.
nlohmann::ordered_json headline(const EvalResult& result);

// recommend

struct RecommendRequest {
  std::vector<std::string> users;
  Timestamp at = 0;
  std::size_t n = 20;
  bool exclude_seen = false;
  bool allow_cold_users = true;
  std::optional<fs::path> category_map;
};

/// Writes `user \t rank \t item \t score` rows.
void recommend(const TrainedModel& model, const EventLog* train, const RecommendRequest& request,
               std::ostream& out);

// bench

struct BenchOptions {
  std::vector<int> features{10, 20, 40, 80};
  std::vector<std::size_t> nnz{10'000, 20'000, 40'000, 80'000};
  std::vector<std::size_t> dims{2000, 1000, 20};
  int repeats = 3;
  double alpha = 100.0;
  double lambda = 0.01;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct BenchRow {
  int features = 0;
  std::size_t nnz = 0;
  double median_seconds = 0.0;
  int runs = 0;
  std::string status = "ok";
};

std::vector<BenchRow> run_bench(const BenchOptions& options);
/// Header `K,nnz,median_epoch_s,runs,status`, one row per grid point.
void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);
/// Linear fit of time against nnz for each K, and quadratic plus
/// power-law fits of time against K for each nnz.
nlohmann::ordered_json bench_fits(const std::vector<BenchRow>& rows);

}  // namespace itals::cli
