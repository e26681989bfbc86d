#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace itals {

using EntityId = std::uint32_t;
using Timestamp = std::int64_t;  // seconds since the unix epoch

/// Bidirectional map between external string ids and dense indices.
/// Indices are handed out in first-seen order.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::vector<std::string> names);

  EntityId intern(std::string_view name);
  std::optional<EntityId> find(std::string_view name) const;
  const std::string& name(EntityId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, EntityId> index_;
};

struct EventRecord {
  EntityId user = 0;
  EntityId item = 0;
  Timestamp timestamp = 0;
  std::optional<EntityId> category;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Validated events plus the id maps that give them meaning.
struct EventLog {
  std::vector<EventRecord> events;
  IdMap users;
  IdMap items;
  IdMap categories;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }

  /// Throws ShapeError if any record refers outside the vocabularies.
  void validate() const;

  /// Copy of the log holding only `selected` events; vocabularies are kept.
  EventLog subset(std::span<const std::size_t> selected) const;
};

struct RatingRecord {
  EntityId user = 0;
  EntityId item = 0;
  double rating = 0.0;
  Timestamp timestamp = 0;
};

struct RatingLog {
  std::vector<RatingRecord> ratings;
  IdMap users;
  IdMap items;
};

/// Reads `user \t item \t timestamp [\t category]` lines. Lines starting
/// with '#' and blank lines are skipped.
EventLog ingest_events(std::istream& in, std::string_view source = "<stream>");
EventLog read_event_file(const std::filesystem::path& path);

/// Reads `user \t item \t rating \t timestamp` lines.
RatingLog ingest_ratings(std::istream& in, std::string_view source = "<stream>");
RatingLog read_rating_file(const std::filesystem::path& path);

/// Writes events in the canonical TSV form accepted by ingest_events.
void write_events(std::ostream& out, const EventLog& log);

/// Parses a timestamp field: non-negative integer or decimal seconds.
/// Fractional seconds are truncated.
std::optional<Timestamp> parse_timestamp(std::string_view field);

/// Item -> category lookup, indexed by item id.
struct ItemCategories {
  std::vector<std::optional<EntityId>> of_item;
  IdMap categories;
};

/// Reads `item \t category` lines. Items absent from `items` are ignored;
/// the first line for an item wins.
ItemCategories read_category_map(std::istream& in, const IdMap& items,
                                 std::string_view source = "<stream>");
ItemCategories read_category_map_file(const std::filesystem::path& path, const IdMap& items);

/// Builds the lookup from the optional category column of an event log.
ItemCategories categories_from_events(const EventLog& log);

}  // namespace itals
