#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sessionrank/events.hpp"

namespace sessionrank {

// Synthetic clickstream model: every session draws a latent intent
// category; intent-category items are clicked with intent_click_prob and
// the rest with noise_click_prob. Purchases follow clicks, and views land
// on other shown items, biased toward the clicked item's category. Clicks
// therefore carry the intent signal strongly and views carry a diluted
// version of it.
struct SyntheticConfig {
  std::size_t n_users = 50;
  std::size_t n_items = 200;
  std::size_t n_categories = 10;
  std::size_t sessions_per_user = 6;
  std::size_t queries_per_session = 3;
  std::size_t list_length = 20;
  double intent_fraction = 0.15;  // share of each list drawn from the intent category
  double intent_click_prob = 0.7;
  double noise_click_prob = 0.05;
  double purchase_prob = 0.15;
  double view_prob = 0.7;
  double view_same_category_prob = 0.5;
  std::size_t views_per_click = 1;  // neighbor views drawn per click, each with view_prob
  // Spontaneous examination without a click, per impression. Off by
  // default; when set, views carry intent signal of their own instead of
  // being purely click-derived (real logs show more views than clicks).
  double spontaneous_view_intent_prob = 0.0;
  double spontaneous_view_noise_prob = 0.0;

  void validate() const;  // throws DataError on bad values
};

// Generator-side tallies, used as the independent oracle for dataset
// preparation and sampling tests.
struct SyntheticBookkeeping {
  std::size_t sessions = 0;
  std::size_t queries = 0;
  std::size_t impressions = 0;
  std::size_t intent_impressions = 0;
  std::size_t noise_impressions = 0;
  std::size_t clicks = 0;
  std::size_t intent_clicks = 0;
  std::size_t noise_clicks = 0;
  std::size_t views = 0;
  std::size_t purchases = 0;
};

std::vector<Event> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                                      SyntheticBookkeeping* bookkeeping = nullptr);

// Items are named so the category is recoverable: item k belongs to
// category k mod n_categories.
std::string synthetic_item_id(std::size_t item_index);
std::size_t synthetic_item_category(const std::string& item_id, std::size_t n_categories);

}  // namespace sessionrank
