#include "sessionrank/events.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace sessionrank {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::query:
      return "query";
    case EventKind::presentation:
      return "presentation";
    case EventKind::click:
      return "click";
    case EventKind::view:
      return "view";
    case EventKind::purchase:
      return "purchase";
  }
  return "?";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "query") return EventKind::query;
  if (s == "presentation") return EventKind::presentation;
  if (s == "click") return EventKind::click;
  if (s == "view") return EventKind::view;
  if (s == "purchase") return EventKind::purchase;
  throw DataError("unknown event kind: " + s);
}

namespace {

Event parse_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  if (!j.is_object()) throw DataError("event line is not an object");
  Event e;
  e.timestamp_ms = j.at("ts").get<std::int64_t>();
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("user_hash")) e.user_hash = j.at("user_hash").get<std::string>();
  if (j.contains("client_key")) e.client_key = j.at("client_key").get<std::string>();
  if (j.contains("query_id")) e.query_id = j.at("query_id").get<std::string>();
  if (j.contains("item_id")) e.item_id = j.at("item_id").get<std::string>();
  if (j.contains("shown_items")) {
    j.at("shown_items").get_to(e.shown_items);
  }
  if (j.contains("is_queryless")) e.is_queryless = j.at("is_queryless").get<bool>();

  switch (e.kind) {
    case EventKind::presentation:
      if (e.query_id.empty() || e.shown_items.empty()) {
        throw DataError("presentation needs query_id and nonempty shown_items");
      }
      break;
    case EventKind::click:
    case EventKind::view:
    case EventKind::purchase:
      if (e.item_id.empty()) throw DataError("behavior event needs item_id");
      break;
    case EventKind::query:
      if (e.query_id.empty()) throw DataError("query event needs query_id");
      break;
  }
  return e;
}

}  // namespace

std::vector<Event> parse_events(std::istream& in, ParseStats* stats) {
  if (!in.good()) throw DataError("parse_events: unreadable stream");
  std::vector<Event> events;
  ParseStats local;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++local.total_lines;
    try {
      events.push_back(parse_line(line));
    } catch (const std::exception& e) {
      ++local.malformed_lines;
      if (local.malformed_lines <= 5) {
        std::cerr << "warning: skipping malformed event line " << local.total_lines << ": "
                  << e.what() << '\n';
      }
    }
  }
  if (in.bad()) throw DataError("parse_events: stream read failure");
  if (local.total_lines > 0 &&
      10 * local.malformed_lines > local.total_lines) {
    throw DataError("parse_events: " + std::to_string(local.malformed_lines) + " of " +
                    std::to_string(local.total_lines) + " lines malformed (>10%)");
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.group_key() != b.group_key()) return a.group_key() < b.group_key();
    return a.timestamp_ms < b.timestamp_ms;
  });
  if (stats) *stats = local;
  return events;
}

std::vector<Event> parse_events_file(const std::string& path, ParseStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open events file: " + path);
  return parse_events(in, stats);
}

std::string event_to_json_line(const Event& e) {
  nlohmann::ordered_json j;
  j["ts"] = e.timestamp_ms;
  j["kind"] = to_string(e.kind);
  if (!e.user_hash.empty()) j["user_hash"] = e.user_hash;
  if (!e.client_key.empty()) j["client_key"] = e.client_key;
  if (!e.query_id.empty()) j["query_id"] = e.query_id;
  if (!e.item_id.empty()) j["item_id"] = e.item_id;
  if (!e.shown_items.empty()) j["shown_items"] = e.shown_items;
  if (e.kind == EventKind::query) j["is_queryless"] = e.is_queryless;
  return j.dump();
}

void write_events_file(const std::string& path, const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write events file: " + path);
  for (const Event& e : events) out << event_to_json_line(e) << '\n';
  if (!out) throw DataError("write failure on events file: " + path);
}

}  // namespace sessionrank
