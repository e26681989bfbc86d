#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <new>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "itals/bench.hpp"
#include "itals/error.hpp"
#include "itals/ials.hpp"

namespace itals::cli {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("itals");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("ITALS_LOG"); env != nullptr && *env != '\0') {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_names(const fs::path& path, const IdMap& map) {
  auto out = open_output(path);
  for (const auto& name : map.names()) out << name << '\n';
}

void write_log(const fs::path& path, const EventLog& log) {
  auto out = open_output(path);
  write_events(out, log);
}

}  // namespace

EventLog prepare_events(std::istream& in, InputFormat format, std::optional<double> threshold,
                        std::string_view source) {
  if (format == InputFormat::events) {
    if (threshold) throw Error("--threshold applies to rating input only");
    return ingest_events(in, source);
  }
  return implicitize(ingest_ratings(in, source), threshold.value_or(-std::numeric_limits<double>::infinity()));
}

PrepareReport cmd_prepare(const PrepareOptions& options) {
  std::ifstream in(options.input, std::ios::binary);
  if (!in) throw Error("cannot read " + options.input.string());
  const auto log = prepare_events(in, options.format, options.threshold, options.input.string());

  write_log(options.output, log);
  write_names(fs::path(options.output.string() + ".users"), log.users);
  write_names(fs::path(options.output.string() + ".items"), log.items);

  PrepareReport report;
  report.events = log.size();
  report.users = log.users.size();
  report.items = log.items.size();
  if (options.split_timestamp && options.split_quantile) throw Error("give either --split-ts or --split-quantile");
  if (options.split_quantile) report.split_timestamp = quantile_timestamp(log, *options.split_quantile);
  if (options.split_timestamp) report.split_timestamp = options.split_timestamp;
  if (report.split_timestamp) {
    if (!options.train_output || !options.test_output) throw Error("a split needs --train-out and --test-out");
    auto split = split_by_date(log, {*report.split_timestamp, options.horizon});
    for (const auto& w : split.warnings) spdlog::warn("{}", w);
    write_log(*options.train_output, split.train);
    write_log(*options.test_output, split.test);
    report.train_events = split.train.size();
    report.test_events = split.test.size();
  }
  return report;
}

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::itals: return "itals";
    case Algorithm::ials: return "ials";
    case Algorithm::ica: return "ica";
  }
  return "itals";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "itals") return Algorithm::itals;
  if (text == "ials") return Algorithm::ials;
  if (text == "ica") return Algorithm::ica;
  throw Error("unknown algorithm '" + std::string(text) + "'");
}

const std::map<std::string, std::string>& TrainedModel::metadata() const {
  return single ? single->metadata : composite->metadata;
}

const std::vector<IdMap>& TrainedModel::id_maps() const {
  return single ? single->id_maps : composite->id_maps;
}

TrainedModel train_model(const EventLog& train, const TrainOptions& options,
                         const EpochCallback& on_epoch) {
  options.config.validate();
  options.scheme.validate();
  const auto spec = ContextSpec::parse(options.context, options.utc_offset);
  if (options.algo == Algorithm::ials && !spec.none()) throw Error("ials takes no context; use --context none");
  if (options.algo == Algorithm::ica && spec.axes.size() != 1) throw Error("ica needs exactly one context axis");

  const std::array<const EventLog*, 1> logs{&train};
  const auto categories = spec.needs_categories() ? load_categories(options.category_map, logs) : CategoryLookup{};
  auto tensor = build_training_tensor(train, spec, categories, options.scheme);
  spdlog::info("tensor {} cells over {} axes", tensor.obs.nnz(), tensor.obs.shape().order());

  std::map<std::string, std::string> metadata{
      {"algo", to_string(options.algo)},
      {"alpha", nlohmann::json(options.scheme.alpha).dump()},
      {"base", nlohmann::json(options.scheme.base).dump()},
      {"context", spec.to_string()},
      {"utc_offset", std::to_string(options.utc_offset)},
  };

  TrainedModel out;
  switch (options.algo) {
    case Algorithm::itals:
      out.single = fit(tensor.obs, options.config, on_epoch);
      break;
    case Algorithm::ials:
      out.single = ials::fit(tensor.obs, options.config);
      break;
    case Algorithm::ica:
      out.composite = fit_ica(tensor.obs, options.config);
      break;
  }
  if (out.single) {
    out.single->id_maps = std::move(tensor.id_maps);
    out.single->metadata = std::move(metadata);
  } else {
    out.composite->id_maps = std::move(tensor.id_maps);
    out.composite->metadata = std::move(metadata);
  }
  return out;
}

void save(const TrainedModel& model, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (model.single) {
    save_model(*model.single, path);
  } else {
    save_composite(*model.composite, path);
  }
}

TrainedModel load(const fs::path& path) {
  TrainedModel out;
  if (peek_model_kind(path) == ModelKind::single) {
    out.single = load_model(path);
  } else {
    out.composite = load_composite(path);
  }
  return out;
}

namespace {

ContextSpec model_context(const TrainedModel& model) {
  const auto& meta = model.metadata();
  const auto ctx = meta.find("context");
  const auto offset = meta.find("utc_offset");
  return ContextSpec::parse(ctx == meta.end() ? "none" : ctx->second,
                            offset == meta.end() ? 0 : std::stoll(offset->second));
}

/// Sorted model item ids per model user, from a log in its own vocabulary.
std::vector<std::vector<EntityId>> seen_items(const TrainedModel& model, const EventLog& log) {
  const auto& maps = model.id_maps();
  std::vector<std::vector<EntityId>> out(maps.at(0).size());
  for (const auto& ev : log.events) {
    const auto user = maps[0].find(log.users.name(ev.user));
    const auto item = maps[1].find(log.items.name(ev.item));
    if (user && item) out[*user].push_back(*item);
  }
  for (auto& items : out) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return out;
}

ContextResolver resolver_for(const TrainedModel& model, const ContextSpec& spec,
                             std::span<const EventLog* const> history,
                             const std::optional<fs::path>& category_map) {
  const auto categories = spec.needs_categories() ? load_categories(category_map, history) : CategoryLookup{};
  return make_resolver(spec, model.id_maps(), history, categories);
}

}  // namespace

EvalResult evaluate(const TrainedModel& model, const EventLog& test, const EventLog* train,
                    const EvalRequest& request) {
  const auto spec = model_context(model);
  std::vector<const EventLog*> history;
  if (train != nullptr) history.push_back(train);
  history.push_back(&test);
  const auto resolve = resolver_for(model, spec, history, request.category_map);

  std::vector<std::vector<EntityId>> seen;
  if (request.exclude_seen) {
    if (train == nullptr) throw Error("--exclude-seen needs the training events");
    seen = seen_items(model, *train);
  }
  const auto* exclude = request.exclude_seen ? &seen : nullptr;
  const auto& maps = model.id_maps();
  const auto queries = make_queries(test, maps.at(0), maps.at(1), resolve, request.options.grouping);
  const auto ranker = model.single ? make_ranker(*model.single, exclude) : make_ranker(*model.composite, exclude);
  return recall_precision_at(ranker, queries, request.options);
}

nlohmann::ordered_json headline(const EvalResult& result) {
  nlohmann::ordered_json out;
  if (result.curve.empty()) return out;
  const auto n = std::min<std::size_t>(20, result.curve.size());
  out["N"] = n;
  out["recall"] = result.at(n).recall;
  out["precision"] = result.at(n).precision;
  out["queries"] = result.evaluated;
  out["skipped"] = result.skipped;
  return out;
}

void recommend(const TrainedModel& model, const EventLog* train, const RecommendRequest& request,
               std::ostream& out) {
  const auto spec = model_context(model);
  std::vector<const EventLog*> history;
  if (train != nullptr) history.push_back(train);
  const auto resolve = resolver_for(model, spec, history, request.category_map);

  std::vector<std::vector<EntityId>> seen;
  if (request.exclude_seen) {
    if (train == nullptr) throw Error("--exclude-seen needs the training events");
    seen = seen_items(model, *train);
  }
  const auto& maps = model.id_maps();
  const auto cold = static_cast<EntityId>(maps.at(0).size());
  for (const auto& name : request.users) {
    const auto user = maps[0].find(name);
    if (!user && !request.allow_cold_users) throw Error("unknown user '" + name + "'");
    const auto context = resolve(user, request.at);
    RecommendOptions options;
    options.n = request.n;
    options.allow_cold_user = true;
    if (user && request.exclude_seen) options.exclude = seen[*user];
    const auto list = model.single ? recommend_topn(*model.single, user.value_or(cold), context, options)
                                   : recommend_topn(*model.composite, user.value_or(cold), context, options);
    for (std::size_t r = 0; r < list.items.size(); ++r) {
      out << name << '\t' << r + 1 << '\t' << maps[1].name(list.items[r].item) << '\t'
          << nlohmann::json(list.items[r].score).dump() << '\n';
    }
  }
}

std::vector<BenchRow> run_bench(const BenchOptions& options) {
  std::vector<BenchRow> rows;
  for (auto nnz : options.nnz) {
    std::optional<ObservationTensor> obs;
    std::string failure;
    try {
      obs = bench::synthesize_tensor({options.dims, nnz, options.alpha, options.seed});
    } catch (const std::bad_alloc&) {
      failure = "out of memory";
    } catch (const Error& e) {
      failure = e.what();
    }
    for (int k : options.features) {
      BenchRow row{.features = k, .nnz = nnz};
      if (!obs) {
        row.status = failure;
        rows.push_back(row);
        continue;
      }
      try {
        TrainConfig config;
        config.features = k;
        config.lambda = options.lambda;
        config.seed = options.seed;
        config.threads = options.threads;
        const auto timing = bench::time_epochs(*obs, config, options.repeats);
        row.median_seconds = timing.median_seconds;
        row.runs = static_cast<int>(timing.runs.size());
      } catch (const std::bad_alloc&) {
        row.status = "out of memory";
      }
      spdlog::info("K={} nnz={} median epoch {:.4f}s", k, nnz, row.median_seconds);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << "K,nnz,median_epoch_s,runs,status\n";
  for (const auto& r : rows) {
    out << r.features << ',' << r.nnz << ',' << nlohmann::json(r.median_seconds).dump() << ',' << r.runs << ','
        << r.status << '\n';
  }
}

nlohmann::ordered_json bench_fits(const std::vector<BenchRow>& rows) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_k;
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_nnz;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    by_k[r.features].first.push_back(static_cast<double>(r.nnz));
    by_k[r.features].second.push_back(r.median_seconds);
    by_nnz[r.nnz].first.push_back(r.features);
    by_nnz[r.nnz].second.push_back(r.median_seconds);
  }
  nlohmann::ordered_json out;
  out["by_K"] = nlohmann::ordered_json::array();
  for (const auto& [k, xy] : by_k) {
    if (xy.first.size() < 2) continue;
    const auto line = bench::fit_line(xy.first, xy.second);
    out["by_K"].push_back({{"K", k}, {"slope", line.slope}, {"intercept", line.intercept}, {"r2", line.r2}});
  }
  out["by_nnz"] = nlohmann::ordered_json::array();
  for (const auto& [nnz, xy] : by_nnz) {
    if (xy.first.size() < 3) continue;
    const auto quad = bench::fit_quadratic(xy.first, xy.second);
    const auto power = bench::fit_power_law(xy.first, xy.second);
    out["by_nnz"].push_back({{"nnz", nnz},
                             {"quadratic", {{"c0", quad.c0}, {"c1", quad.c1}, {"c2", quad.c2}, {"r2", quad.r2}}},
                             {"power_law", {{"exponent", power.slope}, {"r2", power.r2}}}});
  }
  return out;
}

}  // namespace itals::cli
