#include "sessionrank/dataset.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace sessionrank {

Vocab Vocab::build(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return from_ordered(std::move(ids));
}

Vocab Vocab::from_ordered(std::vector<std::string> ids) {
  Vocab v;
  v.ids_.reserve(ids.size() + 1);
  for (auto& id : ids) {
    v.lookup_.emplace(id, static_cast<int>(v.ids_.size()));
    v.ids_.push_back(std::move(id));
  }
  return v;
}

namespace {

struct TimedItem {
  std::string item;
  std::int64_t ts;
};

struct BlockDraft {
  QueryBlock block;
  std::unordered_set<std::string> shown;
  std::unordered_set<std::string> clicked;
  std::unordered_set<std::string> purchased;
  bool queryless = true;
};

std::vector<std::string> items_before(const std::vector<TimedItem>& timeline,
                                      std::int64_t ts) {
  std::vector<std::string> out;
  for (const auto& t : timeline) {
    if (t.ts < ts) out.push_back(t.item);
  }
  return out;
}

}  // namespace

Dataset prepare_dataset(const std::vector<Session>& sessions) {
  Dataset ds;
  DatasetStats& st = ds.stats;
  st.input_sessions = sessions.size();

  std::set<std::string> users;
  std::set<std::string> products;
  bool any_anonymous = false;
  std::size_t shown_total = 0;

  std::vector<std::vector<QueryBlock>> retained;

  for (const Session& session : sessions) {
    std::vector<BlockDraft> drafts;
    std::unordered_map<std::string, bool> query_flags;
    std::vector<TimedItem> clicks, views, purchases;
    bool has_text_query = false;

    for (const Event& e : session.events) {
      switch (e.kind) {
        case EventKind::query:
          query_flags[e.query_id] = e.is_queryless;
          if (!e.is_queryless) has_text_query = true;
          break;
        case EventKind::presentation: {
          if (e.shown_items.empty()) {
            ++st.empty_presentations_skipped;
            break;
          }
          BlockDraft d;
          d.block.session_id = session.session_id;
          d.block.query_id = e.query_id;
          d.block.user_hash = e.user_hash;
          d.block.timestamp_ms = e.timestamp_ms;
          d.block.shown_items = e.shown_items;
          d.shown.insert(e.shown_items.begin(), e.shown_items.end());
          // A presentation with no matching query event is treated as a
          // query-less (category browse) impression.
          auto it = query_flags.find(e.query_id);
          d.queryless = it == query_flags.end() ? true : it->second;
          if (!d.queryless) has_text_query = true;
          drafts.push_back(std::move(d));
          break;
        }
        case EventKind::click:
        case EventKind::view:
        case EventKind::purchase: {
          // Attribute to the most recent presentation that showed the item.
          BlockDraft* owner = nullptr;
          for (auto rit = drafts.rbegin(); rit != drafts.rend(); ++rit) {
            if (rit->shown.count(e.item_id)) {
              owner = &*rit;
              break;
            }
          }
          if (!owner) {
            ++st.dropped_unattributed_events;
            break;
          }
          if (e.kind == EventKind::click) {
            owner->clicked.insert(e.item_id);
            clicks.push_back({e.item_id, e.timestamp_ms});
          } else if (e.kind == EventKind::view) {
            views.push_back({e.item_id, e.timestamp_ms});
          } else {
            owner->purchased.insert(e.item_id);
            purchases.push_back({e.item_id, e.timestamp_ms});
          }
          break;
        }
      }
    }

    if (has_text_query) {
      ++st.dropped_text_query_sessions;
      continue;
    }
    if (drafts.size() < 2) {
      ++st.dropped_short_sessions;
      continue;
    }

    std::vector<QueryBlock> blocks;
    blocks.reserve(drafts.size());
    for (auto& d : drafts) {
      QueryBlock b = std::move(d.block);
      b.labels.reserve(b.shown_items.size());
      for (const auto& item : b.shown_items) {
        b.labels.push_back(d.purchased.count(item) ? 2 : d.clicked.count(item) ? 1 : 0);
      }
      b.preceding_clicks = items_before(clicks, b.timestamp_ms);
      b.preceding_views = items_before(views, b.timestamp_ms);
      b.preceding_purchases = items_before(purchases, b.timestamp_ms);
      blocks.push_back(std::move(b));
    }

    ++st.sessions;
    st.queryless_queries += blocks.size();
    st.click_logs += clicks.size();
    st.view_logs += views.size();
    st.purchase_records += purchases.size();
    for (const auto& b : blocks) {
      shown_total += b.shown_items.size();
      products.insert(b.shown_items.begin(), b.shown_items.end());
    }
    const std::string& user = blocks.front().user_hash;
    if (user.empty()) {
      any_anonymous = true;
    } else {
      users.insert(user);
    }
    retained.push_back(std::move(blocks));
  }

  if (retained.empty()) {
    std::ostringstream msg;
    msg << "prepare_dataset: no sessions retained (input=" << st.input_sessions
        << ", dropped text-query=" << st.dropped_text_query_sessions
        << ", dropped <2 queries=" << st.dropped_short_sessions << ")";
    throw DataError(msg.str());
  }
  if (st.dropped_unattributed_events > 0) {
    std::cerr << "warning: dropped " << st.dropped_unattributed_events
              << " behavior events on never-presented items\n";
  }

  st.users = users.size() + (any_anonymous ? 1 : 0);
  st.presented_products = products.size();
  st.avg_shown_per_query =
      static_cast<double>(shown_total) / static_cast<double>(st.queryless_queries);

  ds.item_vocab = Vocab::build({products.begin(), products.end()});
  ds.user_vocab = Vocab::build({users.begin(), users.end()});

  auto index_block = [&ds](QueryBlock& b) {
    b.user_idx = ds.user_vocab.index(b.user_hash);
    auto map_all = [&ds](const std::vector<std::string>& ids, std::vector<int>& out) {
      out.clear();
      out.reserve(ids.size());
      for (const auto& id : ids) out.push_back(ds.item_vocab.index(id));
    };
    map_all(b.shown_items, b.shown_idx);
    map_all(b.preceding_clicks, b.click_idx);
    map_all(b.preceding_views, b.view_idx);
    map_all(b.preceding_purchases, b.purchase_idx);
  };

  for (auto& blocks : retained) {
    for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
      index_block(blocks[i]);
      ds.train.push_back(std::move(blocks[i]));
    }
    index_block(blocks.back());
    ds.test.push_back(std::move(blocks.back()));
  }
  return ds;
}

std::string stats_to_text(const DatasetStats& s) {
  std::ostringstream out;
  auto row = [&out](const std::string& name, const std::string& value) {
    out << "  " << std::left << std::setw(28) << name << std::right << std::setw(14)
        << value << '\n';
  };
  out << "Dataset statistics\n";
  row("#users", std::to_string(s.users));
  row("#sessions", std::to_string(s.sessions));
  row("#query-less queries", std::to_string(s.queryless_queries));
  row("#presented products", std::to_string(s.presented_products));
  row("#click logs", std::to_string(s.click_logs));
  row("#view logs", std::to_string(s.view_logs));
  row("#purchase records", std::to_string(s.purchase_records));
  {
    std::ostringstream v;
    v << std::fixed << std::setprecision(1) << s.avg_shown_per_query;
    row("avg.(show items) per query", v.str());
  }
  out << "Preparation\n";
  row("input sessions", std::to_string(s.input_sessions));
  row("dropped: text query", std::to_string(s.dropped_text_query_sessions));
  row("dropped: <2 queries", std::to_string(s.dropped_short_sessions));
  row("dropped: unattributed events", std::to_string(s.dropped_unattributed_events));
  return out.str();
}

std::string stats_to_json(const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["users"] = s.users;
  j["sessions"] = s.sessions;
  j["queryless_queries"] = s.queryless_queries;
  j["presented_products"] = s.presented_products;
  j["click_logs"] = s.click_logs;
  j["view_logs"] = s.view_logs;
  j["purchase_records"] = s.purchase_records;
  j["avg_shown_per_query"] = s.avg_shown_per_query;
  j["input_sessions"] = s.input_sessions;
  j["dropped_text_query_sessions"] = s.dropped_text_query_sessions;
  j["dropped_short_sessions"] = s.dropped_short_sessions;
  j["dropped_unattributed_events"] = s.dropped_unattributed_events;
  return j.dump(2);
}

}  // namespace sessionrank
