#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "itals/error.hpp"

namespace itals::cli {
namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("itals_cli_test_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

// Small log with a clear hour-of-day pattern: morning items and evening items.
std::string toy_events() {
  std::ostringstream out;
  std::mt19937_64 gen(5);
  for (int u = 0; u < 30; ++u) {
    for (int day = 0; day < 10; ++day) {
      const long base = 86400L * day;
      out << "u" << u << "\tm" << gen() % 6 << '\t' << base + 8 * 3600 + gen() % 3600 << '\n';
      out << "u" << u << "\te" << gen() % 6 << '\t' << base + 20 * 3600 + gen() % 3600 << '\n';
    }
  }
  return out.str();
}

TEST(ContextSpecParse, Forms) {
  EXPECT_TRUE(ContextSpec::parse("none").none());
  const auto bands = ContextSpec::parse("timeband:uniform:48");
  ASSERT_EQ(bands.axes.size(), 1u);
  EXPECT_EQ(bands.axes[0].season.band_count(), 48u);
  EXPECT_EQ(bands.axes[0].season.season_length, 86400);
  EXPECT_EQ(bands.axes[0].season.boundaries[1], 1800);

  const auto week = ContextSpec::parse("timeband:week:uniform:7", 3600);
  EXPECT_EQ(week.axes[0].season.season_length, 7 * 86400);
  EXPECT_EQ(week.axes[0].season.utc_offset, 3600);

  const auto custom = ContextSpec::parse("timeband:86400:0,21600,64800");
  EXPECT_EQ(custom.axes[0].season.boundaries, (std::vector<Timestamp>{0, 21600, 64800}));

  const auto both = ContextSpec::parse("timeband:uniform:4+sequence:2:0.5");
  ASSERT_EQ(both.axes.size(), 2u);
  EXPECT_EQ(both.axes[1].history_depth, 2u);
  EXPECT_DOUBLE_EQ(both.axes[1].decay, 0.5);
  EXPECT_TRUE(both.needs_categories());

  const auto again = ContextSpec::parse(both.to_string());
  EXPECT_EQ(again.to_string(), both.to_string());
  EXPECT_EQ(again.axes[0].season.boundaries, both.axes[0].season.boundaries);
}

TEST(ContextSpecParse, Rejects) {
  EXPECT_THROW(ContextSpec::parse("weather"), Error);
  EXPECT_THROW(ContextSpec::parse("timeband:uniform:x"), Error);
  EXPECT_THROW(ContextSpec::parse("timeband:uniform:0"), Error);
  EXPECT_THROW(ContextSpec::parse("timeband:86400:5,3"), Error);
  EXPECT_THROW(ContextSpec::parse("sequence"), Error);
  EXPECT_THROW(ContextSpec::parse("sequence:0"), Error);
}

TEST(Prepare, ThresholdFiveKeepsOnlyFives) {
  std::istringstream in("a\tx\t5\t1\na\ty\t4\t2\nb\tz\t5\t3\n");
  const auto log = prepare_events(in, InputFormat::ratings, 5.0);
  EXPECT_EQ(log.size(), 2u);
  EXPECT_EQ(log.items.names(), (std::vector<std::string>{"x", "z"}));
}

TEST(Prepare, EmptyInputGivesEmptyOutput) {
  TempDir dir;
  spit(dir / "in.tsv", "");
  PrepareOptions options;
  options.input = dir / "in.tsv";
  options.output = dir / "out.tsv";
  const auto report = cmd_prepare(options);
  EXPECT_EQ(report.events, 0u);
  EXPECT_EQ(slurp(dir / "out.tsv"), "");
  EXPECT_EQ(slurp(dir / "out.tsv.users"), "");
}

TEST(Prepare, IdempotentOnCanonicalInput) {
  TempDir dir;
  spit(dir / "raw.tsv", "# comment\r\nu1\ti1\t10.7\r\nu2\ti1\t5\tcat\n\nu1\ti2\t7\n");
  PrepareOptions first;
  first.input = dir / "raw.tsv";
  first.output = dir / "once.tsv";
  cmd_prepare(first);
  PrepareOptions second;
  second.input = dir / "once.tsv";
  second.output = dir / "twice.tsv";
  cmd_prepare(second);
  EXPECT_EQ(slurp(dir / "once.tsv"), slurp(dir / "twice.tsv"));
  EXPECT_EQ(slurp(dir / "once.tsv.items"), "i1\ni2\n");
}

TEST(Prepare, SplitWritesPartition) {
  TempDir dir;
  spit(dir / "in.tsv", toy_events());
  PrepareOptions options;
  options.input = dir / "in.tsv";
  options.output = dir / "all.tsv";
  options.split_quantile = 0.8;
  options.train_output = dir / "train.tsv";
  options.test_output = dir / "test.tsv";
  const auto report = cmd_prepare(options);
  EXPECT_EQ(report.train_events + report.test_events, report.events);
  EXPECT_GT(report.test_events, 0u);
  const auto train = read_event_file(dir / "train.tsv");
  const auto test = read_event_file(dir / "test.tsv");
  for (const auto& e : train.events) EXPECT_LT(e.timestamp, *report.split_timestamp);
  for (const auto& e : test.events) EXPECT_GE(e.timestamp, *report.split_timestamp);
}

TEST(Train, SameSeedGivesByteIdenticalFiles) {
  TempDir dir;
  std::istringstream in(toy_events());
  const auto log = ingest_events(in);
  TrainOptions options;
  options.context = "timeband:uniform:24";
  options.config.features = 4;
  options.config.epochs = 3;
  save(train_model(log, options), dir / "a.bin");
  save(train_model(log, options), dir / "b.bin");
  EXPECT_EQ(slurp(dir / "a.bin"), slurp(dir / "b.bin"));
  options.config.seed = 43;
  save(train_model(log, options), dir / "c.bin");
  EXPECT_NE(slurp(dir / "a.bin"), slurp(dir / "c.bin"));

  const auto loaded = load(dir / "a.bin");
  ASSERT_TRUE(loaded.single.has_value());
  EXPECT_EQ(loaded.metadata().at("algo"), "itals");
  EXPECT_EQ(loaded.single->order(), 3u);
  EXPECT_EQ(loaded.id_maps()[2].size(), 24u);
}

TEST(Train, ContextNoneIsTwoAxes) {
  std::istringstream in(toy_events());
  const auto log = ingest_events(in);
  TrainOptions options;
  options.config.features = 3;
  options.config.epochs = 1;
  EXPECT_EQ(train_model(log, options).single->order(), 2u);
  options.algo = Algorithm::ials;
  EXPECT_EQ(train_model(log, options).single->order(), 2u);
  options.context = "timeband:uniform:4";
  EXPECT_THROW(train_model(log, options), Error);
  options.algo = Algorithm::ica;
  const auto ica = train_model(log, options);
  ASSERT_TRUE(ica.composite.has_value());
  EXPECT_EQ(ica.composite->state_count(), 4u);
}

TEST(Train, SequenceNeedsCategories) {
  std::istringstream in("u\ta\t1\nu\tb\t2\n");
  const auto log = ingest_events(in);
  TrainOptions options;
  options.context = "sequence:1";
  options.config.features = 2;
  options.config.epochs = 1;
  EXPECT_THROW(train_model(log, options), ShapeError);

  std::istringstream tagged("u\ta\t1\tdrama\nu\tb\t2\tcomedy\nv\ta\t3\tdrama\n");
  const auto tagged_log = ingest_events(tagged);
  const auto model = train_model(tagged_log, options);
  EXPECT_EQ(model.id_maps()[2].names(), (std::vector<std::string>{"drama", "comedy", "<cold>"}));
}

TEST(Eval, SchemaIsFixedAcrossModels) {
  std::istringstream in(toy_events());
  const auto log = ingest_events(in);
  const auto split = split_by_date(log, {quantile_timestamp(log, 0.8), std::nullopt});
  std::vector<std::string> headers;
  for (auto [algo, context] : {std::pair{Algorithm::itals, "timeband:uniform:24"}, std::pair{Algorithm::ials, "none"},
                               std::pair{Algorithm::ica, "timeband:uniform:24"}}) {
    TrainOptions options;
    options.algo = algo;
    options.context = context;
    options.config.features = 4;
    options.config.epochs = 3;
    const auto model = train_model(split.train, options);
    EvalRequest request;
    const auto result = evaluate(model, split.test, &split.train, request);
    ASSERT_EQ(result.curve.size(), 50u);
    EXPECT_EQ(result.evaluated, 30u);
    std::ostringstream metrics;
    emit_metrics_jsonl(result, {"toy", to_string(algo), 4, 0.0}, metrics);
    std::istringstream lines(metrics.str());
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
      auto row = nlohmann::ordered_json::parse(line);
      std::string keys;
      for (auto& [k, v] : row.items()) keys += k + ",";
      headers.push_back(keys);
      ++rows;
    }
    EXPECT_EQ(rows, 50);
    const auto head = headline(result);
    EXPECT_EQ(head["N"], 20);
  }
  for (const auto& h : headers) EXPECT_EQ(h, "dataset,model,K,N,recall,precision,wall_time,");
}

TEST(Eval, PerfectToyModelRecallsEverythingAtItemCount) {
  std::istringstream in("u\ta\t1\nu\tb\t2\nv\tb\t3\nv\tc\t4\n");
  const auto train = ingest_events(in);
  std::istringstream tin("u\tc\t10\nv\ta\t11\n");
  const auto test = ingest_events(tin);
  TrainOptions options;
  options.config.features = 2;
  options.config.epochs = 2;
  const auto model = train_model(train, options);
  EvalRequest request;
  request.options.n_max = 3;
  const auto result = evaluate(model, test, &train, request);
  EXPECT_DOUBLE_EQ(result.at(3).recall, 1.0);
}

TEST(Resolver, SequenceUsesEventsBeforeRequest) {
  std::istringstream in("u\ta\t1\tdrama\nu\tb\t2\tcomedy\nu\tc\t3\thorror\n");
  const auto log = ingest_events(in);
  TrainOptions options;
  options.context = "sequence:2:0.5";
  options.config.features = 2;
  options.config.epochs = 1;
  const auto model = train_model(log, options);
  const std::array<const EventLog*, 1> history{&log};
  const auto spec = ContextSpec::parse(model.metadata().at("context"));
  const auto resolve = make_resolver(spec, model.id_maps(), history, load_categories(std::nullopt, history));
  const auto& labels = model.id_maps()[2];
  auto ctx = resolve(EntityId{0}, 3);
  ASSERT_EQ(ctx[0].size(), 2u);
  EXPECT_EQ(ctx[0][0], (StateWeight{*labels.find("comedy"), 1.0}));
  EXPECT_EQ(ctx[0][1], (StateWeight{*labels.find("drama"), 0.5}));
  auto cold = resolve(std::nullopt, 3);
  EXPECT_EQ(cold[0][0].state, *labels.find("<cold>"));
  auto first = resolve(EntityId{0}, 1);
  EXPECT_EQ(first[0][0].state, *labels.find("<cold>"));
}

TEST(Recommend, WritesRankedRows) {
  std::istringstream in(toy_events());
  const auto log = ingest_events(in);
  TrainOptions options;
  options.context = "timeband:uniform:24";
  options.config.features = 4;
  options.config.epochs = 3;
  const auto model = train_model(log, options);
  RecommendRequest request;
  request.users = {"u1", "stranger"};
  request.at = 8 * 3600;
  request.n = 3;
  std::ostringstream out;
  recommend(model, &log, request, out);
  std::istringstream lines(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 6);
  EXPECT_EQ(out.str().rfind("u1\t1\t", 0), 0u);
  request.allow_cold_users = false;
  std::ostringstream ignored;
  EXPECT_THROW(recommend(model, &log, request, ignored), Error);
}

TEST(Bench, OneGridPointGivesOneRow) {
  BenchOptions options;
  options.features = {4};
  options.nnz = {500};
  options.dims = {40, 30, 5};
  options.repeats = 3;
  const auto rows = run_bench(options);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 3);
  EXPECT_EQ(rows[0].status, "ok");
  std::ostringstream csv;
  write_bench_csv(rows, csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "K,nnz,median_epoch_s,runs,status");
  int count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 1);
  const auto fits = bench_fits(rows);
  EXPECT_TRUE(fits["by_K"].empty());
}

}  // namespace
}  // namespace itals::cli
