#include "sessionrank/synthetic.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "sessionrank/rng.hpp"
#include "sessionrank/sessionize.hpp"

namespace sessionrank {

void SyntheticConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DataError(std::string("synthetic config: ") + name + " outside [0,1]");
    }
  };
  prob(intent_fraction, "intent_fraction");
  prob(intent_click_prob, "intent_click_prob");
  prob(noise_click_prob, "noise_click_prob");
  prob(purchase_prob, "purchase_prob");
  prob(view_prob, "view_prob");
  prob(view_same_category_prob, "view_same_category_prob");
  prob(spontaneous_view_intent_prob, "spontaneous_view_intent_prob");
  prob(spontaneous_view_noise_prob, "spontaneous_view_noise_prob");
  if (n_users == 0 || n_items == 0 || n_categories == 0 || sessions_per_user == 0) {
    throw DataError("synthetic config: counts must be positive");
  }
  if (queries_per_session < 2) {
    throw DataError("synthetic config: queries_per_session must be >= 2");
  }
  if (list_length == 0 || list_length > n_items) {
    throw DataError("synthetic config: list_length must be in [1, n_items]");
  }
  if (n_categories > n_items) {
    throw DataError("synthetic config: more categories than items");
  }
  if (views_per_click == 0) {
    throw DataError("synthetic config: views_per_click must be >= 1");
  }
}

std::string synthetic_item_id(std::size_t item_index) {
  std::ostringstream id;
  id << 'i' << std::setw(5) << std::setfill('0') << item_index;
  return id.str();
}

std::size_t synthetic_item_category(const std::string& item_id, std::size_t n_categories) {
  return std::stoull(item_id.substr(1)) % n_categories;
}

namespace {

std::string user_id(std::size_t u) {
  std::ostringstream id;
  id << 'u' << std::setw(4) << std::setfill('0') << u;
  return id.str();
}

// Draws `want` distinct entries from `candidates` that are not yet in the
// list, by partial Fisher-Yates on a scratch copy.
void draw_into(std::vector<std::size_t>& list, std::vector<std::size_t> candidates,
               std::size_t want, Rng& rng) {
  for (std::size_t picked = 0; picked < want && !candidates.empty(); ++picked) {
    const std::size_t at = rng.below(candidates.size());
    std::swap(candidates[at], candidates.back());
    const std::size_t item = candidates.back();
    candidates.pop_back();
    if (std::find(list.begin(), list.end(), item) != list.end()) {
      --picked;
      continue;
    }
    list.push_back(item);
  }
}

}  // namespace

std::vector<Event> generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed,
                                      SyntheticBookkeeping* bookkeeping) {
  cfg.validate();
  Rng rng(seed);
  SyntheticBookkeeping book;
  std::vector<Event> events;

  std::vector<std::vector<std::size_t>> category_members(cfg.n_categories);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    category_members[i % cfg.n_categories].push_back(i);
  }
  std::vector<std::size_t> all_items(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) all_items[i] = i;

  constexpr std::int64_t kBaseTs = 1'600'000'000'000;
  constexpr std::int64_t kSessionSpacingMs = 2 * kDefaultSessionGapMs;
  constexpr std::int64_t kTickMs = 1'000;

  const std::size_t n_intent =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   cfg.intent_fraction * static_cast<double>(cfg.list_length) +
                                   0.5));

  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const std::string user = user_id(u);
    for (std::size_t s = 0; s < cfg.sessions_per_user; ++s) {
      const std::size_t intent = rng.below(cfg.n_categories);
      std::int64_t tick = kBaseTs + static_cast<std::int64_t>(s) * kSessionSpacingMs;
      ++book.sessions;

      for (std::size_t q = 0; q < cfg.queries_per_session; ++q) {
        std::ostringstream qid;
        qid << user << "_s" << s << "_q" << q;

        Event query;
        query.user_hash = user;
        query.timestamp_ms = tick;
        tick += kTickMs;
        query.kind = EventKind::query;
        query.query_id = qid.str();
        query.is_queryless = true;
        events.push_back(query);
        ++book.queries;

        std::vector<std::size_t> shown;
        shown.reserve(cfg.list_length);
        draw_into(shown, category_members[intent], std::min(n_intent, cfg.list_length), rng);
        draw_into(shown, all_items, cfg.list_length - shown.size(), rng);
        rng.shuffle(shown);

        Event pres;
        pres.user_hash = user;
        pres.timestamp_ms = tick;
        tick += kTickMs;
        pres.kind = EventKind::presentation;
        pres.query_id = query.query_id;
        pres.shown_items.reserve(shown.size());
        for (std::size_t item : shown) pres.shown_items.push_back(synthetic_item_id(item));
        events.push_back(pres);

        std::vector<std::size_t> clicked;
        std::vector<std::size_t> examined;
        for (std::size_t item : shown) {
          const bool is_intent = item % cfg.n_categories == intent;
          ++book.impressions;
          (is_intent ? book.intent_impressions : book.noise_impressions)++;
          const double p = is_intent ? cfg.intent_click_prob : cfg.noise_click_prob;
          if (rng.bernoulli(p)) {
            clicked.push_back(item);
            (is_intent ? book.intent_clicks : book.noise_clicks)++;
          }
          const double sv = is_intent ? cfg.spontaneous_view_intent_prob
                                      : cfg.spontaneous_view_noise_prob;
          if (sv > 0.0 && rng.bernoulli(sv)) examined.push_back(item);
        }
        for (std::size_t item : examined) {
          Event view;
          view.user_hash = user;
          view.timestamp_ms = tick;
          tick += kTickMs;
          view.kind = EventKind::view;
          view.item_id = synthetic_item_id(item);
          events.push_back(view);
          ++book.views;
        }

        for (std::size_t item : clicked) {
          Event click;
          click.user_hash = user;
          click.timestamp_ms = tick;
          tick += kTickMs;
          click.kind = EventKind::click;
          click.item_id = synthetic_item_id(item);
          events.push_back(click);
          ++book.clicks;

          // The user compares the clicked product with others on the
          // page, preferring the same category.
          std::vector<std::size_t> same_cat, others;
          for (std::size_t other : shown) {
            if (other == item) continue;
            if (other % cfg.n_categories == item % cfg.n_categories) {
              same_cat.push_back(other);
            } else {
              others.push_back(other);
            }
          }
          for (std::size_t v = 0; v < cfg.views_per_click; ++v) {
            if (!rng.bernoulli(cfg.view_prob)) continue;
            const std::vector<std::size_t>* source = nullptr;
            if (!same_cat.empty() && rng.bernoulli(cfg.view_same_category_prob)) {
              source = &same_cat;
            } else if (!others.empty()) {
              source = &others;
            } else if (!same_cat.empty()) {
              source = &same_cat;
            }
            if (source) {
              Event view;
              view.user_hash = user;
              view.timestamp_ms = tick;
              tick += kTickMs;
              view.kind = EventKind::view;
              view.item_id = synthetic_item_id((*source)[rng.below(source->size())]);
              events.push_back(view);
              ++book.views;
            }
          }

          if (rng.bernoulli(cfg.purchase_prob)) {
            Event buy;
            buy.user_hash = user;
            buy.timestamp_ms = tick;
            tick += kTickMs;
            buy.kind = EventKind::purchase;
            buy.item_id = synthetic_item_id(item);
            events.push_back(buy);
            ++book.purchases;
          }
        }
      }
    }
  }

  if (bookkeeping) *bookkeeping = book;
  return events;
}

}  // namespace sessionrank
