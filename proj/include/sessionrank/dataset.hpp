#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sessionrank/sessionize.hpp"

namespace sessionrank {

// One presentation with its graded labels and the session history seen
// strictly before it. Grades: 2 purchased, 1 clicked, 0 shown only.
struct QueryBlock {
  std::string session_id;
  std::string query_id;
  std::string user_hash;
  std::int64_t timestamp_ms = 0;
  std::vector<std::string> shown_items;
  std::vector<int> labels;
  std::vector<std::string> preceding_clicks;
  std::vector<std::string> preceding_views;
  std::vector<std::string> preceding_purchases;

  // Vocabulary indices, filled by prepare_dataset. 0 is the OOV row.
  int user_idx = 0;
  std::vector<int> shown_idx;
  std::vector<int> click_idx;
  std::vector<int> view_idx;
  std::vector<int> purchase_idx;
};

// Id <-> index mapping. Index 0 is reserved for out-of-vocabulary ids.
class Vocab {
 public:
  Vocab() : ids_{"<oov>"} {}

  // Builds indices 1..n over the given ids in sorted order.
  static Vocab build(std::vector<std::string> ids);

  // Restores a vocabulary whose ids are already in index order (1..n).
  static Vocab from_ordered(std::vector<std::string> ids);

  // Ids in index order, OOV slot excluded.
  std::vector<std::string> ordered_ids() const {
    return {ids_.begin() + 1, ids_.end()};
  }

  int index(const std::string& id) const {
    auto it = lookup_.find(id);
    return it == lookup_.end() ? 0 : it->second;
  }
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  std::size_t size() const { return ids_.size(); }  // includes the OOV slot

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> lookup_;
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t sessions = 0;
  std::size_t queryless_queries = 0;
  std::size_t presented_products = 0;  // distinct shown items
  std::size_t click_logs = 0;
  std::size_t view_logs = 0;
  std::size_t purchase_records = 0;
  double avg_shown_per_query = 0.0;
  // diagnostics
  std::size_t input_sessions = 0;
  std::size_t dropped_text_query_sessions = 0;
  std::size_t dropped_short_sessions = 0;
  std::size_t dropped_unattributed_events = 0;
  std::size_t empty_presentations_skipped = 0;
};

struct Dataset {
  std::vector<QueryBlock> train;
  std::vector<QueryBlock> test;  // the last query of each retained session
  Vocab item_vocab;
  Vocab user_vocab;
  DatasetStats stats;
};

// Keeps sessions that are all query-less with at least two queries,
// derives labels and preceding behavior lists, and reserves the last
// query of each session as test. Throws DataError when nothing remains.
Dataset prepare_dataset(const std::vector<Session>& sessions);

std::string stats_to_text(const DatasetStats& s);
std::string stats_to_json(const DatasetStats& s);

}  // namespace sessionrank
