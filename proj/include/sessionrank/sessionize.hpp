#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sessionrank/events.hpp"

namespace sessionrank {

inline constexpr std::int64_t kDefaultSessionGapMs = 3'600'000;

// An uninterrupted run of one user's events; a gap of >= gap_ms starts a
// new session.
struct Session {
  std::string session_id;  // deterministic hash of the first event
  std::string group_key;
  std::vector<Event> events;
};

// Splits events into sessions per group key. Input must already be
// sorted by (group key, timestamp), which parse_events guarantees.
std::vector<Session> sessionize(const std::vector<Event>& events,
                                std::int64_t gap_ms = kDefaultSessionGapMs);

// FNV-1a, used for deterministic session ids.
std::uint64_t fnv1a_hash(const std::string& s);

}  // namespace sessionrank
