#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "itals/composite.hpp"
#include "itals/events.hpp"
#include "itals/model.hpp"

namespace itals {

struct SplitSpec {
  Timestamp split_timestamp = 0;
  std::optional<Timestamp> test_horizon;
};

struct SplitResult {
  EventLog train;
  EventLog test;
  std::vector<std::string> warnings;
};

/// Train gets events before the split, test gets events in
/// [split, split + horizon). Both keep the input's vocabularies.
SplitResult split_by_date(const EventLog& events, const SplitSpec& spec);

/// Timestamp below which `fraction` of the events fall.
Timestamp quantile_timestamp(const EventLog& events, double fraction);

/// Keeps ratings >= threshold as events, re-indexing ids in first-seen order.
EventLog implicitize(const RatingLog& ratings, double threshold);

struct ScoredItem {
  EntityId item = 0;
  double score = 0.0;
};

struct RankedList {
  EntityId user = 0;
  std::vector<ContextStates> context;
  std::vector<ScoredItem> items;
};

/// Highest `n` scores, ties broken by ascending item id. `exclude` must be sorted.
std::vector<ScoredItem> top_n(std::span<const double> scores, std::size_t n,
                              std::span<const EntityId> exclude = {});

/// Scores of every item for `user_vector` under `context`, one entry per
/// context axis of the model in axis order.
Eigen::VectorXd score_items(const Model& model, const Eigen::VectorXd& user_vector,
                            std::span<const ContextStates> context);

struct RecommendOptions {
  std::size_t n = 20;
  std::span<const EntityId> exclude;  ///< sorted item ids to leave out
  bool allow_cold_user = false;       ///< unknown users score with a zero vector
};

RankedList recommend_topn(const Model& model, EntityId user, std::span<const ContextStates> context,
                          const RecommendOptions& options);
/// The state with the largest weight in context[0] selects the sub-model.
RankedList recommend_topn(const CompositeModel& model, EntityId user,
                          std::span<const ContextStates> context, const RecommendOptions& options);

/// One ranking request: a user in a context and the distinct items they
/// interacted with there. Users or items unknown to the model stay in as misses.
struct EvalQuery {
  std::optional<EntityId> user;
  std::vector<ContextStates> context;
  std::vector<EntityId> relevant;
  std::size_t unknown_relevant = 0;

  std::size_t relevant_count() const noexcept { return relevant.size() + unknown_relevant; }
};

using Ranker = std::function<std::vector<EntityId>(const EvalQuery& query, std::size_t n)>;

enum class Averaging { macro, micro };

/// One query per test user, or one per (user, request context) pair.
enum class QueryGrouping { user, user_context };

struct EvalOptions {
  std::size_t n_max = 50;
  Averaging averaging = Averaging::macro;
  bool skip_unknown_users = false;
  QueryGrouping grouping = QueryGrouping::user;
};

struct PrPoint {
  std::size_t n = 0;
  double recall = 0.0;
  double precision = 0.0;
  double hits = 0.0;  ///< mean hits per query
};

struct EvalResult {
  std::vector<PrPoint> curve;  ///< curve[n - 1] holds the values at N = n
  std::size_t evaluated = 0;
  std::size_t skipped = 0;

  const PrPoint& at(std::size_t n) const { return curve.at(n - 1); }
};

EvalResult recall_precision_at(const Ranker& ranker, std::span<const EvalQuery> queries,
                               const EvalOptions& options);

/// Maps a test request (model user id if known, timestamp) to its context.
using ContextResolver =
    std::function<std::vector<ContextStates>(std::optional<EntityId> user, Timestamp timestamp)>;

/// Groups test events into queries. Per-user queries take the context of the
/// user's earliest test event; per-context queries resolve every event.
/// Names are translated through the model vocabularies.
std::vector<EvalQuery> make_queries(const EventLog& test, const IdMap& model_users,
                                    const IdMap& model_items, const ContextResolver& resolve,
                                    QueryGrouping grouping = QueryGrouping::user);

/// Sorted item ids per user.
std::vector<std::vector<EntityId>> items_by_user(const EventLog& log, std::size_t users);

Ranker make_ranker(const Model& model, const std::vector<std::vector<EntityId>>* exclude = nullptr);
Ranker make_ranker(const CompositeModel& model,
                   const std::vector<std::vector<EntityId>>* exclude = nullptr);

EvalResult recall_precision_at(const Model& model, const EventLog& test,
                               const ContextResolver& resolve, const EvalOptions& options);

/// `N,recall,precision` header plus one row per N.
void emit_pr_curve(const EvalResult& result, std::ostream& out);

struct MetricsLabel {
  std::string dataset;
  std::string model;
  int features = 0;
  double wall_seconds = 0.0;
};

/// One JSON object per N with dataset, model, K, N, recall, precision, wall_time.
void emit_metrics_jsonl(const EvalResult& result, const MetricsLabel& label, std::ostream& out);

}  // namespace itals
