#include "itals/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "itals/context.hpp"
#include "itals/error.hpp"

namespace itals {

SplitResult split_by_date(const EventLog& events, const SplitSpec& spec) {
  if (spec.test_horizon && *spec.test_horizon <= 0) throw ShapeError("test horizon must be positive");
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const auto ts = events.events[e].timestamp;
    if (ts < spec.split_timestamp) {
      train_idx.push_back(e);
    } else if (!spec.test_horizon || ts < spec.split_timestamp + *spec.test_horizon) {
      test_idx.push_back(e);
    }
  }
  SplitResult out{events.subset(train_idx), events.subset(test_idx), {}};
  if (out.train.empty()) out.warnings.emplace_back("training period is empty");
  if (out.test.empty()) out.warnings.emplace_back("test period is empty");
  return out;
}

Timestamp quantile_timestamp(const EventLog& events, double fraction) {
  if (events.empty()) throw ShapeError("quantile of an empty log");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ShapeError("quantile fraction must be in [0, 1]");
  std::vector<Timestamp> ts;
  ts.reserve(events.size());
  for (const auto& ev : events.events) ts.push_back(ev.timestamp);
  std::sort(ts.begin(), ts.end());
  const auto idx = std::min(ts.size() - 1, static_cast<std::size_t>(fraction * static_cast<double>(ts.size())));
  return ts[idx];
}

EventLog implicitize(const RatingLog& ratings, double threshold) {
  EventLog out;
  for (const auto& r : ratings.ratings) {
    if (!(r.rating >= threshold)) continue;
    EventRecord ev;
    ev.user = out.users.intern(ratings.users.name(r.user));
    ev.item = out.items.intern(ratings.items.name(r.item));
    ev.timestamp = r.timestamp;
    out.events.push_back(ev);
  }
  return out;
}

std::vector<ScoredItem> top_n(std::span<const double> scores, std::size_t n,
                              std::span<const EntityId> exclude) {
  std::vector<ScoredItem> candidates;
  candidates.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto id = static_cast<EntityId>(i);
    if (!exclude.empty() && std::binary_search(exclude.begin(), exclude.end(), id)) continue;
    candidates.push_back({id, std::isnan(scores[i]) ? -INFINITY : scores[i]});
  }
  const auto keep = std::min(n, candidates.size());
  auto better = [](const ScoredItem& a, const ScoredItem& b) {
    return a.score > b.score || (a.score == b.score && a.item < b.item);
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), better);
  candidates.resize(keep);
  return candidates;
}

Eigen::VectorXd score_items(const Model& model, const Eigen::VectorXd& user_vector,
                            std::span<const ContextStates> context) {
  const auto ctx_axes = model.shape.context_axes();
  if (context.size() != ctx_axes.size()) {
    throw ShapeError("model has " + std::to_string(ctx_axes.size()) + " context axes, request has " +
                     std::to_string(context.size()));
  }
  Eigen::VectorXd q = user_vector;
  for (std::size_t c = 0; c < ctx_axes.size(); ++c) {
    q.array() *= resolve_context_vector(model, ctx_axes[c], context[c]).array();
  }
  return model.factors[model.shape.item_axis()].transpose() * q;
}

RankedList recommend_topn(const Model& model, EntityId user, std::span<const ContextStates> context,
                          const RecommendOptions& options) {
  const auto& users = model.factors[model.shape.user_axis()];
  Eigen::VectorXd u;
  if (user < users.cols()) {
    u = users.col(user);
  } else if (options.allow_cold_user) {
    u = Eigen::VectorXd::Zero(model.features());
  } else {
    throw ShapeError("unknown user " + std::to_string(user));
  }
  const Eigen::VectorXd scores = score_items(model, u, context);
  RankedList out;
  out.user = user;
  out.context.assign(context.begin(), context.end());
  out.items = top_n({scores.data(), static_cast<std::size_t>(scores.size())}, options.n, options.exclude);
  return out;
}

RankedList recommend_topn(const CompositeModel& model, EntityId user,
                          std::span<const ContextStates> context, const RecommendOptions& options) {
  if (context.size() != 1 || context.front().empty()) {
    throw ShapeError("composite model needs exactly one context state list");
  }
  const auto& states = context.front();
  const auto chosen = std::max_element(states.begin(), states.end(), [](const auto& a, const auto& b) {
    return a.weight < b.weight || (a.weight == b.weight && a.state > b.state);
  });
  if (chosen->state >= model.state_count()) throw ShapeError("context state out of range");
  const std::size_t users = model.shape.dims[model.shape.user_axis()];
  const std::size_t items = model.shape.dims[model.shape.item_axis()];
  if (user >= users && !options.allow_cold_user) throw ShapeError("unknown user " + std::to_string(user));

  Eigen::VectorXd scores = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(items));
  const auto& sub = model.per_state[chosen->state];
  if (sub && user < users) {
    scores = sub->factors[sub->shape.item_axis()].transpose() *
             sub->factors[sub->shape.user_axis()].col(user);
  }
  RankedList out;
  out.user = user;
  out.context.assign(context.begin(), context.end());
  out.items = top_n({scores.data(), static_cast<std::size_t>(scores.size())}, options.n, options.exclude);
  return out;
}

EvalResult recall_precision_at(const Ranker& ranker, std::span<const EvalQuery> queries,
                               const EvalOptions& options) {
  if (options.n_max < 1) throw ShapeError("n_max must be >= 1");
  const std::size_t n_max = options.n_max;
  std::vector<double> recall(n_max, 0.0);
  std::vector<double> precision(n_max, 0.0);
  std::vector<double> hits_total(n_max, 0.0);
  double relevant_total = 0.0;
  EvalResult result;

  std::vector<std::size_t> hits(n_max);
  for (const auto& q : queries) {
    if (q.relevant_count() == 0) continue;
    if (!q.user && options.skip_unknown_users) {
      ++result.skipped;
      continue;
    }
    std::fill(hits.begin(), hits.end(), 0);
    if (q.user) {
      const auto ranked = ranker(q, n_max);
      std::size_t running = 0;
      for (std::size_t n = 0; n < n_max; ++n) {
        if (n < ranked.size() &&
            std::find(q.relevant.begin(), q.relevant.end(), ranked[n]) != q.relevant.end()) {
          ++running;
        }
        hits[n] = running;
      }
    }
    const double rel = static_cast<double>(q.relevant_count());
    for (std::size_t n = 0; n < n_max; ++n) {
      const double h = static_cast<double>(hits[n]);
      recall[n] += h / rel;
      precision[n] += h / static_cast<double>(n + 1);
      hits_total[n] += h;
    }
    relevant_total += rel;
    ++result.evaluated;
  }

  result.curve.resize(n_max);
  const double count = static_cast<double>(result.evaluated);
  for (std::size_t n = 0; n < n_max; ++n) {
    auto& p = result.curve[n];
    p.n = n + 1;
    if (result.evaluated == 0) continue;
    p.hits = hits_total[n] / count;
    if (options.averaging == Averaging::macro) {
      p.recall = recall[n] / count;
      p.precision = precision[n] / count;
    } else {
      p.recall = hits_total[n] / relevant_total;
      p.precision = hits_total[n] / (static_cast<double>(n + 1) * count);
    }
  }
  return result;
}

std::vector<EvalQuery> make_queries(const EventLog& test, const IdMap& model_users,
                                    const IdMap& model_items, const ContextResolver& resolve,
                                    QueryGrouping grouping) {
  // Per-user grouping resolves one context at the user's earliest test event.
  std::unordered_map<EntityId, Timestamp> first_seen;
  if (grouping == QueryGrouping::user) {
    for (const auto& ev : test.events) {
      auto [it, fresh] = first_seen.emplace(ev.user, ev.timestamp);
      if (!fresh) it->second = std::min(it->second, ev.timestamp);
    }
  }

  std::vector<EvalQuery> queries;
  std::vector<std::set<std::string>> unknown_items;
  std::unordered_map<EntityId, std::vector<std::size_t>> groups_of_user;
  for (const auto& ev : test.events) {
    const auto user = model_users.find(test.users.name(ev.user));
    auto& groups = groups_of_user[ev.user];
    std::size_t g;
    if (grouping == QueryGrouping::user && !groups.empty()) {
      g = groups.front();
    } else {
      const Timestamp at = grouping == QueryGrouping::user ? first_seen.at(ev.user) : ev.timestamp;
      auto context = resolve ? resolve(user, at) : std::vector<ContextStates>{};
      auto it = std::find_if(groups.begin(), groups.end(),
                             [&](std::size_t q) { return queries[q].context == context; });
      if (it == groups.end()) {
        g = queries.size();
        groups.push_back(g);
        queries.push_back({user, std::move(context), {}, 0});
        unknown_items.emplace_back();
      } else {
        g = *it;
      }
    }
    const auto& item_name = test.items.name(ev.item);
    if (auto item = model_items.find(item_name)) {
      queries[g].relevant.push_back(*item);
    } else {
      unknown_items[g].insert(item_name);
    }
  }
  for (std::size_t g = 0; g < queries.size(); ++g) {
    auto& rel = queries[g].relevant;
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
    queries[g].unknown_relevant = unknown_items[g].size();
  }
  return queries;
}

std::vector<std::vector<EntityId>> items_by_user(const EventLog& log, std::size_t users) {
  std::vector<std::vector<EntityId>> out(users);
  for (const auto& ev : log.events) {
    if (ev.user < users) out[ev.user].push_back(ev.item);
  }
  for (auto& items : out) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return out;
}

namespace {

std::span<const EntityId> excluded_for(const std::vector<std::vector<EntityId>>* exclude,
                                       EntityId user) {
  if (!exclude || user >= exclude->size()) return {};
  return (*exclude)[user];
}

template <typename M>
Ranker ranker_for(const M& model, const std::vector<std::vector<EntityId>>* exclude) {
  return [&model, exclude](const EvalQuery& q, std::size_t n) {
    RecommendOptions opts;
    opts.n = n;
    opts.exclude = excluded_for(exclude, *q.user);
    const auto list = recommend_topn(model, *q.user, q.context, opts);
    std::vector<EntityId> ids;
    ids.reserve(list.items.size());
    for (const auto& s : list.items) ids.push_back(s.item);
    return ids;
  };
}

}  // namespace

Ranker make_ranker(const Model& model, const std::vector<std::vector<EntityId>>* exclude) {
  return ranker_for(model, exclude);
}

Ranker make_ranker(const CompositeModel& model, const std::vector<std::vector<EntityId>>* exclude) {
  return ranker_for(model, exclude);
}

EvalResult recall_precision_at(const Model& model, const EventLog& test,
                               const ContextResolver& resolve, const EvalOptions& options) {
  if (test.empty()) throw ShapeError("test log is empty");
  if (model.id_maps.size() != model.order()) throw ShapeError("model carries no id maps");
  const auto queries = make_queries(test, model.id_maps[model.shape.user_axis()],
                                    model.id_maps[model.shape.item_axis()], resolve, options.grouping);
  return recall_precision_at(make_ranker(model), queries, options);
}

void emit_pr_curve(const EvalResult& result, std::ostream& out) {
  out << "N,recall,precision\n";
  out << std::setprecision(12);
  for (const auto& p : result.curve) out << p.n << ',' << p.recall << ',' << p.precision << '\n';
}

void emit_metrics_jsonl(const EvalResult& result, const MetricsLabel& label, std::ostream& out) {
  for (const auto& p : result.curve) {
    nlohmann::ordered_json row;
    row["dataset"] = label.dataset;
    row["model"] = label.model;
    row["K"] = label.features;
    row["N"] = p.n;
    row["recall"] = p.recall;
    row["precision"] = p.precision;
    row["wall_time"] = label.wall_seconds;
    out << row.dump() << '\n';
  }
}

}  // namespace itals
