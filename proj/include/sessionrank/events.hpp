#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace sessionrank {

// Errors in input data (bad files, unusable logs). The CLI maps these to
// exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EventKind { query, presentation, click, view, purchase };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

// One timestamped user action from a raw log. Canonical JSONL form, one
// object per line:
//   {"ts": 1600000000000, "kind": "click", "user_hash": "u1",
//    "client_key": "c1", "query_id": "q1", "item_id": "i5",
//    "shown_items": ["i1","i2"], "is_queryless": true}
// ts and kind are required. presentation requires query_id and a nonempty
// shown_items; click/view/purchase require item_id; query requires
// query_id. user_hash may be absent (anonymous); such events group by
// client_key instead. Unknown fields are ignored.
struct Event {
  std::string user_hash;   // empty = anonymous
  std::string client_key;  // grouping fallback for anonymous events
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::query;
  std::string query_id;
  std::string item_id;
  std::vector<std::string> shown_items;
  bool is_queryless = false;

  const std::string& group_key() const {
    return user_hash.empty() ? client_key : user_hash;
  }
};

struct ParseStats {
  std::size_t total_lines = 0;
  std::size_t malformed_lines = 0;
};

// Reads JSONL events, sorted by (group key, timestamp) on return.
// Malformed lines are skipped with a warning on stderr; more than 10% of
// them is a hard error.
std::vector<Event> parse_events(std::istream& in, ParseStats* stats = nullptr);
std::vector<Event> parse_events_file(const std::string& path, ParseStats* stats = nullptr);

std::string event_to_json_line(const Event& e);
void write_events_file(const std::string& path, const std::vector<Event>& events);

}  // namespace sessionrank
