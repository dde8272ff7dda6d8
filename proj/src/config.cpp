#include "sessionrank/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace sessionrank {

SieConfig RunConfig::sie_config() const {
  SieConfig c;
  c.embedding_dim = embedding_dim;
  c.mlp_widths.assign(mlp_widths.begin(), mlp_widths.end());
  if (pooling == "average") {
    c.pooling = Pooling::average;
  } else if (pooling == "max") {
    c.pooling = Pooling::max;
  } else {
    throw DataError("config: pooling must be average or max, got " + pooling);
  }
  c.mask = {mask_clicks, mask_views};
  c.use_user_embedding = use_user_embedding;
  c.separate_view_table = separate_view_table;
  c.purchases_as_clicks = purchases_as_clicks;
  if (repr_item == "zero") {
    c.repr_item = ReprItemMode::zero;
  } else if (repr_item == "mean_of_shown") {
    c.repr_item = ReprItemMode::mean_of_shown;
  } else {
    throw DataError("config: repr_item must be zero or mean_of_shown, got " + repr_item);
  }
  c.neg_ratio = neg_ratio;
  c.purchase_copies = purchase_copies;
  c.eta = eta;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

RankConfig RunConfig::rank_config() const {
  RankConfig c;
  c.proj_widths.assign(proj_widths.begin(), proj_widths.end());
  c.k = k;
  c.eta = eta;
  c.iterations = iterations;
  c.seed = seed;
  c.enumeration_cap = enumeration_cap;
  c.label_temperature = label_temperature;
  return c;
}

SyntheticConfig RunConfig::synthetic_config() const {
  SyntheticConfig c;
  c.n_users = syn_users;
  c.n_items = syn_items;
  c.n_categories = syn_categories;
  c.sessions_per_user = syn_sessions_per_user;
  c.queries_per_session = syn_queries_per_session;
  c.list_length = syn_list_length;
  c.intent_fraction = syn_intent_fraction;
  c.intent_click_prob = syn_intent_click_prob;
  c.noise_click_prob = syn_noise_click_prob;
  c.purchase_prob = syn_purchase_prob;
  c.view_prob = syn_view_prob;
  c.view_same_category_prob = syn_view_same_category_prob;
  c.views_per_click = syn_views_per_click;
  c.spontaneous_view_intent_prob = syn_spontaneous_view_intent_prob;
  c.spontaneous_view_noise_prob = syn_spontaneous_view_noise_prob;
  return c;
}

GainKind RunConfig::gain_kind() const {
  if (gain == "linear") return GainKind::linear;
  if (gain == "exponential") return GainKind::exponential;
  throw DataError("config: gain must be linear or exponential, got " + gain);
}

std::size_t RunConfig::effective_threads() const {
  if (threads > 0) return static_cast<std::size_t>(threads);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::vector<ConfigEntry> config_entries(RunConfig& c) {
  return {
      {"seed", &c.seed, "random seed for every stage"},
      {"embedding_dim", &c.embedding_dim, "behavior embedding size"},
      {"mlp_widths", &c.mlp_widths, "relu layer widths of the S-IE network"},
      {"eta", &c.eta, "SGD learning rate"},
      {"neg_ratio", &c.neg_ratio, "negatives sampled per positive"},
      {"purchase_copies", &c.purchase_copies, "positive copies per purchased item"},
      {"epochs", &c.epochs, "S-IE training epochs"},
      {"pooling", &c.pooling, "behavior pooling: average | max"},
      {"use_user_embedding", &c.use_user_embedding,
       "embed real user ids instead of the shared anonymous row"},
      {"separate_view_table", &c.separate_view_table,
       "give views their own embedding table"},
      {"purchases_as_clicks", &c.purchases_as_clicks,
       "pool preceding purchases into the click segment"},
      {"repr_item", &c.repr_item,
       "item segment used for the session representation: zero | mean_of_shown"},
      {"mask_clicks", &c.mask_clicks, "use the click behavior segment"},
      {"mask_views", &c.mask_views, "use the view behavior segment"},
      {"proj_widths", &c.proj_widths, "sigmoid projection layer widths"},
      {"k", &c.k, "top-k cutoff of the list loss"},
      {"iterations", &c.iterations, "list-wise training iterations T"},
      {"enumeration_cap", &c.enumeration_cap,
       "exact top-k enumeration budget; above it the loss uses top-1"},
      {"label_temperature", &c.label_temperature, "divisor applied to grades in the loss"},
      {"gain", &c.gain, "NDCG gain: linear | exponential"},
      {"threads", &c.threads, "evaluation threads (0 = cores)"},
      {"session_gap_ms", &c.session_gap_ms, "inactivity gap that starts a new session"},
      {"syn_users", &c.syn_users, "synthetic: number of users"},
      {"syn_items", &c.syn_items, "synthetic: number of items"},
      {"syn_categories", &c.syn_categories, "synthetic: number of categories"},
      {"syn_sessions_per_user", &c.syn_sessions_per_user, "synthetic: sessions per user"},
      {"syn_queries_per_session", &c.syn_queries_per_session,
       "synthetic: queries per session"},
      {"syn_list_length", &c.syn_list_length, "synthetic: items per presentation"},
      {"syn_intent_fraction", &c.syn_intent_fraction,
       "synthetic: share of each list from the intent category"},
      {"syn_intent_click_prob", &c.syn_intent_click_prob,
       "synthetic: click probability on intent items"},
      {"syn_noise_click_prob", &c.syn_noise_click_prob,
       "synthetic: click probability on other items"},
      {"syn_purchase_prob", &c.syn_purchase_prob,
       "synthetic: purchase probability after a click"},
      {"syn_view_prob", &c.syn_view_prob, "synthetic: view probability after a click"},
      {"syn_view_same_category_prob", &c.syn_view_same_category_prob,
       "synthetic: chance a view stays in the clicked item's category"},
      {"syn_views_per_click", &c.syn_views_per_click,
       "synthetic: neighbor views drawn per click"},
      {"syn_spontaneous_view_intent_prob", &c.syn_spontaneous_view_intent_prob,
       "synthetic: spontaneous view probability on intent impressions"},
      {"syn_spontaneous_view_noise_prob", &c.syn_spontaneous_view_noise_prob,
       "synthetic: spontaneous view probability on other impressions"},
  };
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DataError("config: not a boolean: " + v);
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) throw DataError("config: not a number: " + v);
  return out;
}

template <>
double parse_number<double>(const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw DataError("config: not a number: " + v);
  }
  if (pos != v.size()) throw DataError("config: not a number: " + v);
  return out;
}

std::vector<std::uint64_t> parse_size_list(const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(parse_number<std::uint64_t>(part));
  }
  if (out.empty()) throw DataError("config: empty list value: " + v);
  return out;
}

void assign_from_string(const ConfigField& field, const std::string& value) {
  std::visit(
      [&value](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          *p = parse_bool(value);
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = value;
        } else if constexpr (std::is_same_v<T, std::vector<std::uint64_t>>) {
          *p = parse_size_list(value);
        } else {
          *p = parse_number<T>(value);
        }
      },
      field);
}

std::string field_to_string(const ConfigField& field) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, std::vector<std::uint64_t>>) {
          std::string out;
          for (std::size_t i = 0; i < p->size(); ++i) {
            if (i) out += ',';
            out += std::to_string((*p)[i]);
          }
          return out;
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream out;
          out.precision(17);
          out << *p;
          return out.str();
        } else {
          return std::to_string(*p);
        }
      },
      field);
}

void load_json_config(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config: invalid JSON in " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw DataError("config: JSON root must be an object");
  auto entries = config_entries(cfg);
  for (const auto& [key, value] : doc.items()) {
    bool found = false;
    for (auto& entry : entries) {
      if (entry.key != key) continue;
      found = true;
      if (value.is_array()) {
        std::string joined;
        for (const auto& v : value) {
          if (!joined.empty()) joined += ',';
          joined += v.dump();
        }
        assign_from_string(entry.field, joined);
      } else if (value.is_string()) {
        assign_from_string(entry.field, value.get<std::string>());
      } else {
        assign_from_string(entry.field, value.dump());
      }
      break;
    }
    if (!found) throw DataError("config: unknown key '" + key + "' in " + path);
  }
}

}  // namespace

void apply_config_line(const std::string& key, const std::string& value, RunConfig& cfg) {
  auto entries = config_entries(cfg);
  for (auto& entry : entries) {
    if (entry.key == key) {
      assign_from_string(entry.field, value);
      return;
    }
  }
  throw DataError("config: unknown key '" + key + "'");
}

void load_config_file(const std::string& path, RunConfig& cfg) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    load_json_config(path, cfg);
    return;
  }
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config: missing '=' at " + path + ":" + std::to_string(line_no));
    }
    apply_config_line(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), cfg);
  }
}

std::string config_to_text(const RunConfig& cfg) {
  RunConfig& mutable_cfg = const_cast<RunConfig&>(cfg);
  std::ostringstream out;
  for (const auto& entry : config_entries(mutable_cfg)) {
    out << entry.key << " = " << field_to_string(entry.field) << '\n';
  }
  return out.str();
}

void apply_seed_env(RunConfig& cfg) {
  const char* env = std::getenv("SESSIONRANK_SEED");
  if (!env || *env == '\0') return;
  cfg.seed = parse_number<std::uint64_t>(env);
}

}  // namespace sessionrank
