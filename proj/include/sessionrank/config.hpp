#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sessionrank/eval.hpp"
#include "sessionrank/synthetic.hpp"

namespace sessionrank {

// Every tunable of the pipeline, defaulting to the published
// hyperparameters. Flat key=value (or JSON) files round-trip losslessly.
struct RunConfig {
  std::uint64_t seed = 42;

  // session information embedding
  std::uint64_t embedding_dim = 200;
  std::vector<std::uint64_t> mlp_widths{800, 200, 100};
  double eta = 0.001;
  int neg_ratio = 5;
  int purchase_copies = 3;
  std::uint64_t epochs = 10;
  std::string pooling = "average";  // average | max
  bool use_user_embedding = false;
  bool separate_view_table = false;
  bool purchases_as_clicks = false;
  std::string repr_item = "zero";  // zero | mean_of_shown
  bool mask_clicks = true;
  bool mask_views = true;

  // list-wise ranking
  std::vector<std::uint64_t> proj_widths{100, 100};
  std::uint64_t k = 10;
  std::uint64_t iterations = 10;
  std::uint64_t enumeration_cap = 5000;
  double label_temperature = 1.0;

  // evaluation
  std::string gain = "linear";  // linear | exponential
  std::uint64_t threads = 0;    // 0 = number of cores

  // data
  std::int64_t session_gap_ms = 3'600'000;

  // synthetic generator
  std::uint64_t syn_users = 50;
  std::uint64_t syn_items = 200;
  std::uint64_t syn_categories = 10;
  std::uint64_t syn_sessions_per_user = 6;
  std::uint64_t syn_queries_per_session = 3;
  std::uint64_t syn_list_length = 20;
  double syn_intent_fraction = 0.15;
  double syn_intent_click_prob = 0.7;
  double syn_noise_click_prob = 0.05;
  double syn_purchase_prob = 0.15;
  double syn_view_prob = 0.7;
  double syn_view_same_category_prob = 0.5;
  std::uint64_t syn_views_per_click = 1;
  double syn_spontaneous_view_intent_prob = 0.0;
  double syn_spontaneous_view_noise_prob = 0.0;

  SieConfig sie_config() const;
  RankConfig rank_config() const;
  SyntheticConfig synthetic_config() const;
  GainKind gain_kind() const;
  std::size_t effective_threads() const;
};

using ConfigField = std::variant<std::uint64_t*, int*, double*, bool*, std::string*,
                                 std::int64_t*, std::vector<std::uint64_t>*>;

struct ConfigEntry {
  std::string key;
  ConfigField field;
  std::string help;
};

// Registry backing file parsing, echoing, and CLI flag generation.
std::vector<ConfigEntry> config_entries(RunConfig& cfg);

// key=value (one per line, # comments) or a JSON object, chosen by file
// extension (.json).
void load_config_file(const std::string& path, RunConfig& cfg);
void apply_config_line(const std::string& key, const std::string& value, RunConfig& cfg);

std::string config_to_text(const RunConfig& cfg);

// Applies SESSIONRANK_SEED when set; it takes precedence over file and
// flag values.
void apply_seed_env(RunConfig& cfg);

}  // namespace sessionrank
