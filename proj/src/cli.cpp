#include "sessionrank/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sessionrank/config.hpp"
#include "sessionrank/serialize.hpp"

namespace fs = std::filesystem;

namespace sessionrank {

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

Dataset load_dataset(const RunConfig& cfg, const std::string& events_path) {
  const std::vector<Event> events = parse_events_file(events_path);
  const std::vector<Session> sessions = sessionize(events, cfg.session_gap_ms);
  return prepare_dataset(sessions);
}

void save_vocabs(const fs::path& path, const Dataset& ds) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["items"] = ds.item_vocab.ordered_ids();
  j["users"] = ds.user_vocab.ordered_ids();
  write_text_file(path, j.dump() + "\n");
}

void load_vocabs(const fs::path& path, Vocab& items, Vocab& users) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocab file " + path.string() +
                           " (train the sie stage first)");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid vocab file " + path.string() + ": " + e.what());
  }
  items = Vocab::from_ordered(j.at("items").get<std::vector<std::string>>());
  users = Vocab::from_ordered(j.at("users").get<std::vector<std::string>>());
}

// Re-index the prepared blocks against the vocabulary the models were
// trained with, so evaluation works on any event file.
void reindex_dataset(Dataset& ds, Vocab items, Vocab users) {
  ds.item_vocab = std::move(items);
  ds.user_vocab = std::move(users);
  auto reindex = [&ds](QueryBlock& b) {
    b.user_idx = ds.user_vocab.index(b.user_hash);
    auto map_all = [&ds](const std::vector<std::string>& ids, std::vector<int>& out) {
      out.clear();
      for (const auto& id : ids) out.push_back(ds.item_vocab.index(id));
    };
    map_all(b.shown_items, b.shown_idx);
    map_all(b.preceding_clicks, b.click_idx);
    map_all(b.preceding_views, b.view_idx);
    map_all(b.preceding_purchases, b.purchase_idx);
  };
  for (auto& b : ds.train) reindex(b);
  for (auto& b : ds.test) reindex(b);
}

SieModel load_sie_model(const RunConfig& cfg, const fs::path& model_dir, Dataset& ds) {
  Vocab items, users;
  load_vocabs(model_dir / "vocabs.json", items, users);
  reindex_dataset(ds, std::move(items), std::move(users));
  SieModel sie = init_sie(cfg.sie_config(), ds.item_vocab.size(), ds.user_vocab.size());
  const fs::path path = model_dir / "sie_model.json";
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + " (run train --stage sie first)");
  }
  load_tables(path.string(), sie.params());
  return sie;
}

RankModel load_rank_model(const RunConfig& cfg, const fs::path& model_dir,
                          const SieModel& sie) {
  RankModel model = init_rank_model(sie, cfg.rank_config());
  const fs::path path = model_dir / "rank_model.json";
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + " (run train --stage rank first)");
  }
  load_tables(path.string(), model.params());
  return model;
}

std::string rank_log_to_csv(const std::vector<TrainLogRow>& log) {
  std::ostringstream out;
  out << "iteration,mean_loss\n";
  out.precision(17);
  for (const auto& row : log) out << row.epoch << ',' << row.mean_loss << '\n';
  return out.str();
}

int cmd_gen_synthetic(const RunConfig& cfg, const std::string& out_path, bool json_stats) {
  SyntheticBookkeeping book;
  const std::vector<Event> events =
      generate_synthetic(cfg.synthetic_config(), cfg.seed, &book);
  write_events_file(out_path, events);
  std::cout << "wrote " << events.size() << " events to " << out_path << '\n';

  const std::vector<Session> sessions = sessionize(events, cfg.session_gap_ms);
  const Dataset ds = prepare_dataset(sessions);
  std::cout << (json_stats ? stats_to_json(ds.stats) + "\n" : stats_to_text(ds.stats));
  return 0;
}

int cmd_ingest(const RunConfig& cfg, const std::string& events_path, bool json_stats) {
  const Dataset ds = load_dataset(cfg, events_path);
  std::cout << (json_stats ? stats_to_json(ds.stats) + "\n" : stats_to_text(ds.stats));
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& events_path,
              const std::string& model_dir_str, const std::string& stage) {
  const fs::path model_dir(model_dir_str);
  fs::create_directories(model_dir);
  write_text_file(model_dir / "effective_config.txt", config_to_text(cfg));

  Dataset ds = load_dataset(cfg, events_path);

  SieModel sie;
  if (stage == "sie" || stage == "both") {
    SieTrainResult result = train_sie(ds, cfg.sie_config());
    sie = std::move(result.model);
    save_tables((model_dir / "sie_model.json").string(), sie.params());
    save_vocabs(model_dir / "vocabs.json", ds);
    write_text_file(model_dir / "sie_train_log.csv", train_log_to_csv(result.log));
    std::cout << "sie: " << result.log.size() << " epochs, final loss "
              << (result.log.empty() ? 0.0 : result.log.back().mean_loss) << ", saved to "
              << (model_dir / "sie_model.json").string() << '\n';
  } else {
    sie = load_sie_model(cfg, model_dir, ds);
  }

  if (stage == "rank" || stage == "both") {
    RankTrainResult result = train_listrank(ds, sie, cfg.rank_config());
    save_tables((model_dir / "rank_model.json").string(), result.model.params());
    write_text_file(model_dir / "rank_train_log.csv", rank_log_to_csv(result.log));
    std::cout << "rank: " << result.log.size() << " iterations, final loss "
              << (result.log.empty() ? 0.0 : result.log.back().mean_loss) << ", saved to "
              << (model_dir / "rank_model.json").string() << '\n';
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& events_path,
                 const std::string& model_dir_str, const std::string& report_dir_str,
                 std::vector<std::string> methods, bool ablation) {
  const fs::path model_dir(model_dir_str);
  const fs::path report_dir(report_dir_str);
  fs::create_directories(report_dir);
  write_text_file(report_dir / "effective_config.txt", config_to_text(cfg));

  Dataset ds = load_dataset(cfg, events_path);
  const GainKind gain = cfg.gain_kind();
  const std::size_t threads = cfg.effective_threads();

  const bool needs_sie =
      std::find(methods.begin(), methods.end(), "sie") != methods.end() ||
      std::find(methods.begin(), methods.end(), "listrank") != methods.end();
  SieModel sie;
  RankModel rank_model;
  if (needs_sie) sie = load_sie_model(cfg, model_dir, ds);
  if (std::find(methods.begin(), methods.end(), "listrank") != methods.end()) {
    rank_model = load_rank_model(cfg, model_dir, sie);
  }

  std::ostringstream csv;
  csv << "method,ndcg_at_all,ndcg_at_10,n_queries,n_excluded\n";
  for (const std::string& method : methods) {
    Ranker ranker;
    if (method == "popularity") {
      ranker = popularity_baseline(ds.train);
    } else if (method == "sie") {
      ranker = sie_ranker(sie);
    } else if (method == "listrank") {
      ranker = listrank_ranker(sie, rank_model);
    } else {
      throw DataError("unknown method: " + method);
    }
    const EvalReport report = evaluate(method, ranker, ds.test, gain, threads);
    write_text_file(report_dir / ("report_" + method + ".json"),
                    report_to_json(report, true) + "\n");
    csv << report_to_csv_row(report);
    std::cout << method << ": NDCG@all " << report.ndcg_at_all << ", NDCG@10 "
              << report.ndcg_at_10 << " over " << report.n_queries << " queries ("
              << report.n_excluded << " excluded)\n";
  }
  write_text_file(report_dir / "reports.csv", csv.str());

  if (ablation) {
    const AblationResult table =
        run_ablation(ds, cfg.sie_config(), cfg.rank_config(), gain, threads);
    write_text_file(report_dir / "ablation.csv", ablation_to_csv(table));
    write_text_file(report_dir / "ablation.txt", ablation_to_text(table));
    std::cout << "\nNDCG@all by behavior representation\n" << ablation_to_text(table);
  }
  return 0;
}

int cmd_rank(const RunConfig& cfg, const std::string& events_path,
             const std::string& model_dir_str, const std::string& method,
             const std::string& out_path) {
  Dataset ds = load_dataset(cfg, events_path);
  const fs::path model_dir(model_dir_str);

  Ranker ranker;
  SieModel sie;
  RankModel rank_model;
  if (method == "popularity") {
    ranker = popularity_baseline(ds.train);
  } else if (method == "sie") {
    sie = load_sie_model(cfg, model_dir, ds);
    ranker = sie_ranker(sie);
  } else if (method == "listrank") {
    sie = load_sie_model(cfg, model_dir, ds);
    rank_model = load_rank_model(cfg, model_dir, sie);
    ranker = listrank_ranker(sie, rank_model);
  } else {
    throw DataError("unknown method: " + method);
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write " + out_path);
  for (const QueryBlock& block : ds.test) {
    const std::vector<std::size_t> order = ranker(block);
    out << block.query_id << '\t';
    for (std::size_t p = 0; p < order.size(); ++p) {
      if (p) out << ' ';
      out << block.shown_items[order[p]];
    }
    out << '\n';
  }
  std::cout << "wrote rankings for " << ds.test.size() << " test queries to " << out_path
            << '\n';
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  // Small random instances keep the central-difference sweep fast while
  // exercising every parameter table.
  SyntheticConfig syn;
  syn.n_users = 4;
  syn.n_items = 30;
  syn.n_categories = 5;
  syn.sessions_per_user = 3;
  syn.queries_per_session = 2;
  syn.list_length = 6;
  syn.intent_fraction = 0.34;
  syn.intent_click_prob = 0.9;
  syn.noise_click_prob = 0.1;

  SieConfig sie_cfg;
  sie_cfg.embedding_dim = 5;
  sie_cfg.mlp_widths = {8, 6, 4};
  sie_cfg.use_user_embedding = true;

  RankConfig rank_cfg;
  rank_cfg.proj_widths = {6, 4};
  rank_cfg.enumeration_cap = 5000;

  constexpr double kTolerance = 1e-4;
  double worst = 0.0;
  std::string worst_what;

  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const std::uint64_t seed = cfg.seed + trial;
    const std::vector<Event> events = generate_synthetic(syn, seed);
    const Dataset ds = prepare_dataset(sessionize(events));

    sie_cfg.seed = seed;
    SieModel sie = init_sie(sie_cfg, ds.item_vocab.size(), ds.user_vocab.size());
    Rng rng(seed * 977 + 13);

    // Zero-init biases can leave a whole relu layer at its kink, where the
    // loss is not differentiable and central differences are meaningless.
    // Small random biases keep every pre-activation generic.
    for (auto& layer : sie.mlp) {
      for (double& b : layer.bias.data) b = rng.uniform(-0.05, 0.05);
    }
    for (double& b : sie.head.bias.data) b = rng.uniform(-0.05, 0.05);

    const QueryBlock& block = ds.train[rng.below(ds.train.size())];
    std::size_t target = rng.below(block.shown_idx.size());
    SieSample sample{&block, block.shown_idx[target], rng.bernoulli(0.5)};

    SieGradients sie_grads;
    sie_loss_and_gradients(sie, sample, sie_grads);
    const Gradients dense = sie_dense_gradients(sie, sie_grads);
    GradCheckResult r = finite_difference_check(
        sie.params(), dense,
        [&]() {
          const std::vector<double> probs = sie_forward(sie, block, sample.target_item);
          const std::vector<double> t =
              sample.positive ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
          return cross_entropy(t, probs);
        });
    std::cout << "sie gradcheck      seed " << seed << ": max rel err " << r.max_rel_error
              << " (" << r.worst_param << ")\n";
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_what = "sie:" + r.worst_param;
    }

    rank_cfg.seed = seed;
    rank_cfg.k = 1 + trial % 3;
    RankModel rank = init_rank_model(sie, rank_cfg);
    const std::vector<double> rep = extract_representation(block, sie);
    RankGradients rank_grads;
    rank_loss_and_gradients(rank, rep, block, rank_grads);
    const Gradients rank_dense = rank_dense_gradients(rank, rank_grads);
    // epsilon 1e-4 keeps the central difference out of cancellation noise
    // on near-zero gradient entries
    r = finite_difference_check(
        rank.params(), rank_dense,
        [&]() {
          std::vector<double> scores(block.shown_idx.size());
          for (std::size_t j = 0; j < scores.size(); ++j) {
            scores[j] = score_item(rep, rank, block.shown_idx[j]);
          }
          return listnet_loss(scores, block.labels, rank_cfg.k, rank_cfg.enumeration_cap);
        },
        1e-4);
    std::cout << "listnet gradcheck  seed " << seed << " k=" << rank_cfg.k
              << ": max rel err " << r.max_rel_error << " (" << r.worst_param << ")\n";
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_what = "listnet:" + r.worst_param;
    }
  }

  std::cout << "worst relative error " << worst << " at " << worst_what << '\n';
  if (worst >= kTolerance) {
    std::cerr << "gradcheck FAILED: " << worst_what << " error " << worst << " >= "
              << kTolerance << '\n';
    return 3;
  }
  std::cout << "gradcheck PASSED (tolerance " << kTolerance << ")\n";
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  RunConfig cfg;
  // Config file first, so its values become the defaults flags override.
  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        load_config_file(args[i + 1], cfg);
      } else if (args[i].rfind("--config=", 0) == 0) {
        load_config_file(args[i].substr(9), cfg);
      }
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  CLI::App app{"Session-aware product re-ranking from in-session behaviors"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "config file (key=value, or .json)");

  for (const ConfigEntry& entry : config_entries(cfg)) {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::vector<std::uint64_t>>) {
            // comma-separated in one token, e.g. --mlp_widths 800,200,100
            std::string shown;
            for (std::uint64_t v : *p) {
              if (!shown.empty()) shown += ',';
              shown += std::to_string(v);
            }
            const std::string key = entry.key;
            app.add_option_function<std::string>(
                   "--" + key,
                   [&cfg, key](const std::string& v) { apply_config_line(key, v, cfg); },
                   entry.help)
                ->default_str(shown)
                ->type_name("LIST");
          } else {
            app.add_option("--" + entry.key, *p, entry.help)->capture_default_str();
          }
        },
        entry.field);
  }

  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic event log");
  std::string out_path;
  bool json_stats = false;
  gen->add_option("--out", out_path, "output JSONL path")->required();
  gen->add_flag("--json", json_stats, "print stats as JSON");
  gen->fallthrough();

  auto* ingest = app.add_subcommand("ingest", "parse, sessionize and summarize an event log");
  std::string events_path;
  ingest->add_option("--events", events_path, "JSONL event log")->required();
  ingest->add_flag("--json", json_stats, "print stats as JSON");
  ingest->fallthrough();

  auto* train = app.add_subcommand("train", "train the embedding and ranking models");
  std::string model_dir = "models";
  std::string stage = "both";
  train->add_option("--events", events_path, "JSONL event log")->required();
  train->add_option("--model-dir", model_dir, "output model directory")
      ->capture_default_str();
  train->add_option("--stage", stage, "sie | rank | both")
      ->check(CLI::IsMember({"sie", "rank", "both"}))
      ->capture_default_str();
  train->fallthrough();

  auto* evaluate = app.add_subcommand("evaluate", "rank the test queries and report NDCG");
  std::string report_dir = "reports";
  std::vector<std::string> methods{"popularity", "sie", "listrank"};
  bool ablation = false;
  evaluate->add_option("--events", events_path, "JSONL event log")->required();
  evaluate->add_option("--model-dir", model_dir, "trained model directory")
      ->capture_default_str();
  evaluate->add_option("--report-dir", report_dir, "output report directory")
      ->capture_default_str();
  evaluate->add_option("--methods", methods, "methods to evaluate")
      ->delimiter(',')
      ->capture_default_str();
  evaluate->add_flag("--ablation", ablation, "retrain per behavior mask and emit the grid");
  evaluate->fallthrough();

  auto* rank = app.add_subcommand("rank", "emit re-ranked test lists as TSV");
  std::string method = "listrank";
  rank->add_option("--events", events_path, "JSONL event log")->required();
  rank->add_option("--model-dir", model_dir, "trained model directory")
      ->capture_default_str();
  rank->add_option("--method", method, "popularity | sie | listrank")
      ->check(CLI::IsMember({"popularity", "sie", "listrank"}))
      ->capture_default_str();
  rank->add_option("--out", out_path, "output TSV path")->required();
  rank->fallthrough();

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "verify analytic gradients against finite differences");
  gradcheck->fallthrough();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const DataError& e) {  // bad value inside an option callback
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    apply_seed_env(cfg);
    if (*gen) return cmd_gen_synthetic(cfg, out_path, json_stats);
    if (*ingest) return cmd_ingest(cfg, events_path, json_stats);
    if (*train) return cmd_train(cfg, events_path, model_dir, stage);
    if (*evaluate) {
      return cmd_evaluate(cfg, events_path, model_dir, report_dir, methods, ablation);
    }
    if (*rank) return cmd_rank(cfg, events_path, model_dir, method, out_path);
    if (*gradcheck) return cmd_gradcheck(cfg);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace sessionrank
