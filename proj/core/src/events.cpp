#include "itals/events.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "itals/error.hpp"

namespace itals {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Calls `fn(fields, line_number)` for every data line.
template <typename Fn>
void for_each_record(std::istream& in, std::string_view source, Fn&& fn) {
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == '#') continue;
    fn(split_tabs(view), line_number);
  }
  if (in.bad()) throw ParseError(std::string(source), line_number, "read failure");
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

IdMap::IdMap(std::vector<std::string> names) : names_(std::move(names)) {
  index_.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], static_cast<EntityId>(i)).second) {
      throw ShapeError("duplicate id '" + names_[i] + "' in id map");
    }
  }
}

EntityId IdMap::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<EntityId>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<EntityId> IdMap::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void EventLog::validate() const {
  for (std::size_t e = 0; e < events.size(); ++e) {
    const auto& ev = events[e];
    if (ev.user >= users.size()) {
      throw ShapeError("event " + std::to_string(e) + ": user index out of range");
    }
    if (ev.item >= items.size()) {
      throw ShapeError("event " + std::to_string(e) + ": item index out of range");
    }
    if (ev.timestamp < 0) throw ShapeError("event " + std::to_string(e) + ": negative timestamp");
    if (ev.category && *ev.category >= categories.size()) {
      throw ShapeError("event " + std::to_string(e) + ": category index out of range");
    }
  }
}

EventLog EventLog::subset(std::span<const std::size_t> selected) const {
  EventLog out;
  out.users = users;
  out.items = items;
  out.categories = categories;
  out.events.reserve(selected.size());
  for (auto e : selected) out.events.push_back(events.at(e));
  return out;
}

std::optional<Timestamp> parse_timestamp(std::string_view field) {
  if (field.empty()) return std::nullopt;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  Timestamp whole = 0;
  auto [ptr, ec] = std::from_chars(first, last, whole);
  if (ec == std::errc() && ptr == last) {
    if (whole < 0) return std::nullopt;
    return whole;
  }
  double seconds = 0.0;
  auto [dptr, dec] = std::from_chars(first, last, seconds);
  if (dec != std::errc() || dptr != last || !std::isfinite(seconds) || seconds < 0.0 ||
      seconds >= 9.2e18) {
    return std::nullopt;
  }
  return static_cast<Timestamp>(seconds);
}

EventLog ingest_events(std::istream& in, std::string_view source) {
  EventLog log;
  for_each_record(in, source, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 3 && f.size() != 4) {
      throw ParseError(std::string(source), line,
                       "expected 3 or 4 tab-separated fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) {
      throw ParseError(std::string(source), line, "empty user or item id");
    }
    const auto ts = parse_timestamp(f[2]);
    if (!ts) throw ParseError(std::string(source), line, "bad timestamp '" + std::string(f[2]) + "'");
    EventRecord ev;
    ev.user = log.users.intern(f[0]);
    ev.item = log.items.intern(f[1]);
    ev.timestamp = *ts;
    if (f.size() == 4 && !f[3].empty()) ev.category = log.categories.intern(f[3]);
    log.events.push_back(ev);
  });
  return log;
}

EventLog read_event_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return ingest_events(in, path.string());
}

RatingLog ingest_ratings(std::istream& in, std::string_view source) {
  RatingLog log;
  for_each_record(in, source, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 4) {
      throw ParseError(std::string(source), line,
                       "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) {
      throw ParseError(std::string(source), line, "empty user or item id");
    }
    double rating = 0.0;
    auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), rating);
    if (ec != std::errc() || ptr != f[2].data() + f[2].size() || !std::isfinite(rating)) {
      throw ParseError(std::string(source), line, "bad rating '" + std::string(f[2]) + "'");
    }
    const auto ts = parse_timestamp(f[3]);
    if (!ts) throw ParseError(std::string(source), line, "bad timestamp '" + std::string(f[3]) + "'");
    log.ratings.push_back({log.users.intern(f[0]), log.items.intern(f[1]), rating, *ts});
  });
  return log;
}

RatingLog read_rating_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return ingest_ratings(in, path.string());
}

void write_events(std::ostream& out, const EventLog& log) {
  for (const auto& ev : log.events) {
    out << log.users.name(ev.user) << '\t' << log.items.name(ev.item) << '\t' << ev.timestamp;
    if (ev.category) out << '\t' << log.categories.name(*ev.category);
    out << '\n';
  }
}

ItemCategories read_category_map(std::istream& in, const IdMap& items, std::string_view source) {
  ItemCategories out;
  out.of_item.assign(items.size(), std::nullopt);
  for_each_record(in, source, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw ParseError(std::string(source), line, "expected 'item<TAB>category'");
    }
    const auto item = items.find(f[0]);
    if (!item || out.of_item[*item]) return;
    out.of_item[*item] = out.categories.intern(f[1]);
  });
  return out;
}

ItemCategories read_category_map_file(const std::filesystem::path& path, const IdMap& items) {
  auto in = open_input(path);
  return read_category_map(in, items, path.string());
}

ItemCategories categories_from_events(const EventLog& log) {
  ItemCategories out;
  out.of_item.assign(log.items.size(), std::nullopt);
  for (const auto& ev : log.events) {
    if (!ev.category || out.of_item[ev.item]) continue;
    out.of_item[ev.item] = out.categories.intern(log.categories.name(*ev.category));
  }
  return out;
}

}  // namespace itals
