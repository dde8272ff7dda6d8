#include "sessionrank/sessionize.hpp"

#include <sstream>

namespace sessionrank {

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string make_session_id(const Event& first) {
  std::ostringstream key;
  key << first.group_key() << ':' << first.timestamp_ms;
  std::ostringstream id;
  id << 's' << std::hex << fnv1a_hash(key.str());
  return id.str();
}

}  // namespace

std::vector<Session> sessionize(const std::vector<Event>& events, std::int64_t gap_ms) {
  std::vector<Session> sessions;
  for (const Event& e : events) {
    const bool fresh = sessions.empty() || sessions.back().group_key != e.group_key() ||
                       e.timestamp_ms - sessions.back().events.back().timestamp_ms >= gap_ms;
    if (fresh) {
      Session s;
      s.group_key = e.group_key();
      s.session_id = make_session_id(e);
      sessions.push_back(std::move(s));
    }
    sessions.back().events.push_back(e);
  }
  return sessions;
}

}  // namespace sessionrank
