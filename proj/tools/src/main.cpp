#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "itals/error.hpp"

namespace {

using namespace itals;
using namespace itals::cli;

template <typename T>
std::optional<T> maybe(CLI::Option* opt, const T& value) {
  return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

std::ofstream open_file(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

struct TrainFlags {
  int k = 20;
  int epochs = 10;
  double lambda = 0.01;
  std::string reg_mode = "support";
  double alpha = 100.0;
  double base = 1.0;
  std::uint64_t seed = 42;
  double init_scale = 0.0;
  CLI::Option* init_scale_opt = nullptr;
  int threads = 1;
  std::string context = "none";
  Timestamp utc_offset = 0;
  std::string category_map;
  std::string algo = "itals";

  void add(CLI::App* app) {
    app->add_option("--k", k, "Number of latent features")->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--lambda", lambda, "Regularization strength")->capture_default_str();
    app->add_option("--reg-mode", reg_mode, "constant or support")->capture_default_str();
    app->add_option("--alpha", alpha, "Cell weight = base + alpha * events")->capture_default_str();
    app->add_option("--base", base, "Base weight of observed cells")->capture_default_str();
    app->add_option("--seed", seed, "Initialization seed")->capture_default_str();
    init_scale_opt = app->add_option("--init-scale", init_scale, "Upper bound of uniform init (default 1/sqrt(K))");
    app->add_option("--threads", threads, "Worker threads, 0 for all cores")->capture_default_str();
    app->add_option("--context", context, "none | timeband:... | sequence:C[:decay], joined by '+'")
        ->capture_default_str();
    app->add_option("--utc-offset", utc_offset, "Seconds added to timestamps before banding")->capture_default_str();
    app->add_option("--category-map", category_map, "item<TAB>category file for sequence context");
    app->add_option("--algo", algo, "itals, ials or ica")->capture_default_str();
  }

  TrainOptions options() const {
    TrainOptions out;
    out.context = context;
    out.utc_offset = utc_offset;
    if (!category_map.empty()) out.category_map = category_map;
    out.algo = parse_algorithm(algo);
    out.config = TrainConfig{.features = k,
                             .epochs = epochs,
                             .lambda = lambda,
                             .reg_mode = parse_reg_mode(reg_mode),
                             .seed = seed,
                             .init_scale = maybe(init_scale_opt, init_scale),
                             .threads = threads};
    out.scheme = WeightingScheme{base, alpha};
    return out;
  }
};

InputFormat parse_format(const std::string& text) {
  if (text == "events") return InputFormat::events;
  if (text == "ratings") return InputFormat::ratings;
  throw Error("unknown format '" + text + "'");
}

Averaging parse_averaging(const std::string& text) {
  if (text == "macro") return Averaging::macro;
  if (text == "micro") return Averaging::micro;
  throw Error("unknown averaging '" + text + "'");
}

QueryGrouping parse_grouping(const std::string& text) {
  if (text == "user") return QueryGrouping::user;
  if (text == "user-context") return QueryGrouping::user_context;
  throw Error("unknown grouping '" + text + "'");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Context-aware implicit feedback factorization"};
  app.set_config("--config", "", "Key/value config file; command-line flags win");
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Normalize input into canonical event files");
  std::string input, output, format = "events", train_out, test_out;
  double threshold = 0, split_quantile = 0;
  Timestamp split_ts = 0, horizon = 0;
  prepare->add_option("--input", input, "Input TSV")->required();
  prepare->add_option("--format", format, "events or ratings")->capture_default_str();
  auto* threshold_opt = prepare->add_option("--threshold", threshold, "Keep ratings >= threshold");
  prepare->add_option("--output", output, "Canonical event file")->required();
  auto* split_ts_opt = prepare->add_option("--split-ts", split_ts, "Split timestamp");
  auto* split_q_opt = prepare->add_option("--split-quantile", split_quantile, "Split at this event quantile");
  auto* horizon_opt = prepare->add_option("--horizon", horizon, "Test window length in seconds");
  prepare->add_option("--train-out", train_out, "Train split output");
  prepare->add_option("--test-out", test_out, "Test split output");

  // train
  auto* train = app.add_subcommand("train", "Fit a model");
  TrainFlags flags;
  std::string train_file, model_file;
  train->add_option("--train", train_file, "Training events")->required();
  train->add_option("--model", model_file, "Output model file")->required();
  flags.add(train);

  // eval
  auto* eval = app.add_subcommand("eval", "Recall and precision at N = 1..topn");
  std::string eval_model, test_file, eval_train, metrics_out, pr_out, dataset = "dataset", averaging = "macro",
                                                                     eval_categories;
  std::size_t topn = 50;
  bool exclude_seen = false, skip_unknown = false;
  eval->add_option("--model", eval_model, "Model file")->required();
  eval->add_option("--test", test_file, "Test events")->required();
  eval->add_option("--train", eval_train, "Training events for histories and --exclude-seen");
  eval->add_option("--topn", topn, "Largest N")->capture_default_str();
  eval->add_flag("--exclude-seen", exclude_seen, "Drop training items from rankings");
  eval->add_flag("--skip-unknown-users", skip_unknown, "Leave out users absent from training");
  eval->add_option("--averaging", averaging, "macro or micro")->capture_default_str();
  std::string grouping = "user";
  eval->add_option("--grouping", grouping, "user or user-context")->capture_default_str();
  eval->add_option("--category-map", eval_categories, "item<TAB>category file");
  eval->add_option("--metrics", metrics_out, "JSON lines output");
  eval->add_option("--pr-curve", pr_out, "CSV output");
  eval->add_option("--dataset", dataset, "Dataset label in metrics")->capture_default_str();

  // recommend
  auto* rec = app.add_subcommand("recommend", "Top-N items for users");
  std::string rec_model, rec_train, rec_categories;
  std::vector<std::string> users;
  Timestamp at = 0;
  std::size_t rec_n = 20;
  bool rec_exclude = false;
  rec->add_option("--model", rec_model, "Model file")->required();
  rec->add_option("--user", users, "User names")->required();
  rec->add_option("--at", at, "Request timestamp")->capture_default_str();
  rec->add_option("--topn", rec_n, "List length")->capture_default_str();
  rec->add_option("--train", rec_train, "Training events for histories and --exclude-seen");
  rec->add_flag("--exclude-seen", rec_exclude, "Drop training items");
  rec->add_option("--category-map", rec_categories, "item<TAB>category file");

  // bench
  auto* bench = app.add_subcommand("bench", "Epoch time over a K x nnz grid");
  BenchOptions bench_options;
  std::string bench_out, fits_out;
  bench->add_option("--k-grid", bench_options.features, "K values")->delimiter(',')->capture_default_str();
  bench->add_option("--nnz-grid", bench_options.nnz, "Stored cell counts")->delimiter(',')->capture_default_str();
  bench->add_option("--dims", bench_options.dims, "Synthetic tensor dimensions")->delimiter(',')->capture_default_str();
  bench->add_option("--repeats", bench_options.repeats, "Timed epochs per point")->capture_default_str();
  bench->add_option("--alpha", bench_options.alpha)->capture_default_str();
  bench->add_option("--lambda", bench_options.lambda)->capture_default_str();
  bench->add_option("--seed", bench_options.seed)->capture_default_str();
  bench->add_option("--threads", bench_options.threads)->capture_default_str();
  bench->add_option("--output", bench_out, "CSV output (default stdout)");
  bench->add_option("--fits", fits_out, "JSON regression fits (default stderr log)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) {
      PrepareOptions options{.input = input,
                             .format = parse_format(format),
                             .threshold = maybe(threshold_opt, threshold),
                             .output = output,
                             .split_timestamp = maybe(split_ts_opt, split_ts),
                             .split_quantile = maybe(split_q_opt, split_quantile),
                             .horizon = maybe(horizon_opt, horizon)};
      if (!train_out.empty()) options.train_output = train_out;
      if (!test_out.empty()) options.test_output = test_out;
      const auto report = cmd_prepare(options);
      spdlog::info("{} events, {} users, {} items", report.events, report.users, report.items);
      if (report.split_timestamp) {
        spdlog::info("split at {}: {} train, {} test", *report.split_timestamp, report.train_events,
                     report.test_events);
      }
    } else if (*train) {
      const auto log = read_event_file(train_file);
      const auto options = flags.options();
      const auto start = std::chrono::steady_clock::now();
      const auto model = train_model(log, options, [](const EpochReport& r) {
        spdlog::info("epoch {} took {:.3f}s", r.epoch, r.seconds);
      });
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      spdlog::info("trained {} in {:.3f}s", to_string(options.algo), seconds);
      save(model, model_file);
    } else if (*eval) {
      const auto model = load(eval_model);
      const auto test = read_event_file(test_file);
      std::optional<EventLog> train_log;
      if (!eval_train.empty()) train_log = read_event_file(eval_train);
      EvalRequest request{.options = {.n_max = topn,
                                      .averaging = parse_averaging(averaging),
                                      .skip_unknown_users = skip_unknown,
                                      .grouping = parse_grouping(grouping)},
                          .exclude_seen = exclude_seen};
      if (!eval_categories.empty()) request.category_map = eval_categories;
      const auto start = std::chrono::steady_clock::now();
      const auto result = evaluate(model, test, train_log ? &*train_log : nullptr, request);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!metrics_out.empty()) {
        auto out = open_file(metrics_out);
        const auto algo = model.metadata().find("algo");
        const int k = model.single ? static_cast<int>(model.single->features()) : model.composite->config.features;
        emit_metrics_jsonl(result, {dataset, algo == model.metadata().end() ? "itals" : algo->second, k, seconds}, out);
      }
      if (!pr_out.empty()) {
        auto out = open_file(pr_out);
        emit_pr_curve(result, out);
      }
      std::cout << headline(result).dump() << '\n';
    } else if (*rec) {
      const auto model = load(rec_model);
      std::optional<EventLog> train_log;
      if (!rec_train.empty()) train_log = read_event_file(rec_train);
      RecommendRequest request{.users = users, .at = at, .n = rec_n, .exclude_seen = rec_exclude};
      if (!rec_categories.empty()) request.category_map = rec_categories;
      recommend(model, train_log ? &*train_log : nullptr, request, std::cout);
    } else if (*bench) {
      const auto rows = run_bench(bench_options);
      if (bench_out.empty()) {
        write_bench_csv(rows, std::cout);
      } else {
        auto out = open_file(bench_out);
        write_bench_csv(rows, out);
      }
      const auto fits = bench_fits(rows);
      if (fits_out.empty()) {
        spdlog::info("fits {}", fits.dump());
      } else {
        open_file(fits_out) << fits.dump(2) << '\n';
      }
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
