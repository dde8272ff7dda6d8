#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sessionrank/cli.hpp"
#include "sessionrank/config.hpp"

using namespace sessionrank;
namespace fs = std::filesystem;

namespace {

fs::path test_root() {
  const fs::path root = fs::temp_directory_path() / "sessionrank_cli_test";
  fs::create_directories(root);
  return root;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// tiny-corpus, tiny-model arguments shared by the pipeline tests
std::vector<std::string> small_args() {
  return {"--embedding_dim", "4",  "--mlp_widths", "8,6,4", "--proj_widths", "5,4",
          "--epochs",        "2",  "--iterations", "2",     "--syn_users",   "6",
          "--syn_items",     "30", "--syn_sessions_per_user", "2",
          "--syn_list_length", "6"};
}

int run(std::vector<std::string> args, const std::vector<std::string>& extra = {}) {
  for (const auto& a : extra) args.push_back(a);
  return run_cli(std::move(args));
}

}  // namespace

TEST_CASE("config text round-trips losslessly") {
  RunConfig cfg;
  cfg.seed = 987;
  cfg.eta = 0.0012345678901234567;
  cfg.mlp_widths = {32, 16};
  cfg.pooling = "max";
  cfg.mask_views = false;
  const std::string text = config_to_text(cfg);

  const fs::path path = test_root() / "roundtrip.cfg";
  std::ofstream(path) << text;

  RunConfig loaded;
  load_config_file(path.string(), loaded);
  CHECK(config_to_text(loaded) == text);
  CHECK(loaded.eta == cfg.eta);
  CHECK(loaded.mlp_widths == cfg.mlp_widths);
  CHECK(loaded.pooling == "max");
  CHECK(loaded.mask_views == false);
}

TEST_CASE("json config files load") {
  const fs::path path = test_root() / "config.json";
  std::ofstream(path) << R"({"seed": 5, "mlp_widths": [12, 6], "pooling": "max",)"
                      << R"( "eta": 0.25, "use_user_embedding": true})";
  RunConfig cfg;
  load_config_file(path.string(), cfg);
  CHECK(cfg.seed == 5);
  CHECK(cfg.mlp_widths == std::vector<std::uint64_t>{12, 6});
  CHECK(cfg.pooling == "max");
  CHECK(cfg.eta == 0.25);
  CHECK(cfg.use_user_embedding);
}

TEST_CASE("unknown config keys are rejected") {
  const fs::path path = test_root() / "bad.cfg";
  std::ofstream(path) << "no_such_key = 5\n";
  RunConfig cfg;
  CHECK_THROWS_AS(load_config_file(path.string(), cfg), DataError);
}

TEST_CASE("bad usage exits 1, missing files exit 2") {
  CHECK(run({"no-such-command"}) == 1);
  CHECK(run({"train", "--events", "/nonexistent/events.jsonl"}) == 2);
  CHECK(run({"evaluate", "--events", "/nonexistent/x.jsonl"}) == 2);
}

TEST_CASE("the full pipeline runs and training is byte-deterministic") {
  const fs::path root = test_root() / "pipeline";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string events = (root / "events.jsonl").string();

  CHECK(run({"gen-synthetic", "--out", events}, small_args()) == 0);
  CHECK(run({"ingest", "--events", events, "--json"}, small_args()) == 0);

  const fs::path m1 = root / "models1";
  const fs::path m2 = root / "models2";
  CHECK(run({"train", "--events", events, "--model-dir", m1.string()}, small_args()) == 0);
  CHECK(run({"train", "--events", events, "--model-dir", m2.string()}, small_args()) == 0);

  CHECK(slurp(m1 / "sie_model.json") == slurp(m2 / "sie_model.json"));
  CHECK(slurp(m1 / "rank_model.json") == slurp(m2 / "rank_model.json"));
  CHECK(slurp(m1 / "sie_train_log.csv") == slurp(m2 / "sie_train_log.csv"));
  CHECK(slurp(m1 / "vocabs.json") == slurp(m2 / "vocabs.json"));

  // a different seed must produce a different model
  const fs::path m3 = root / "models3";
  CHECK(run({"train", "--events", events, "--model-dir", m3.string(), "--seed", "7"},
            small_args()) == 0);
  CHECK(slurp(m1 / "sie_model.json") != slurp(m3 / "sie_model.json"));

  const fs::path reports = root / "reports";
  CHECK(run({"evaluate", "--events", events, "--model-dir", m1.string(), "--report-dir",
             reports.string()},
            small_args()) == 0);
  CHECK(fs::exists(reports / "report_popularity.json"));
  CHECK(fs::exists(reports / "report_sie.json"));
  CHECK(fs::exists(reports / "report_listrank.json"));
  CHECK(fs::exists(reports / "reports.csv"));
  CHECK(fs::exists(reports / "effective_config.txt"));

  const fs::path tsv = root / "ranked.tsv";
  CHECK(run({"rank", "--events", events, "--model-dir", m1.string(), "--out", tsv.string()},
            small_args()) == 0);
  std::istringstream lines(slurp(tsv));
  std::string line;
  std::size_t n_lines = 0;
  while (std::getline(lines, line)) {
    ++n_lines;
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    CHECK(tab > 0);
    CHECK(line.size() > tab + 1);
  }
  CHECK(n_lines == 12);  // 6 users x 2 sessions, one test query each
}

TEST_CASE("stage=rank without a trained sie model exits 2") {
  const fs::path root = test_root() / "stage_rank";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string events = (root / "events.jsonl").string();
  REQUIRE(run({"gen-synthetic", "--out", events}, small_args()) == 0);
  CHECK(run({"train", "--events", events, "--model-dir", (root / "empty").string(),
             "--stage", "rank"},
            small_args()) == 2);
}

TEST_CASE("SESSIONRANK_SEED overrides the configured seed") {
  const fs::path root = test_root() / "env_seed";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string events = (root / "events.jsonl").string();
  REQUIRE(run({"gen-synthetic", "--out", events}, small_args()) == 0);

  setenv("SESSIONRANK_SEED", "4242", 1);
  const fs::path env_dir = root / "env";
  CHECK(run({"train", "--events", events, "--model-dir", env_dir.string(), "--stage", "sie",
             "--seed", "1"},
            small_args()) == 0);
  unsetenv("SESSIONRANK_SEED");

  const fs::path flag_dir = root / "flag";
  CHECK(run({"train", "--events", events, "--model-dir", flag_dir.string(), "--stage", "sie",
             "--seed", "4242"},
            small_args()) == 0);

  CHECK(slurp(env_dir / "sie_model.json") == slurp(flag_dir / "sie_model.json"));
  CHECK(slurp(env_dir / "effective_config.txt").find("seed = 4242") != std::string::npos);
}

TEST_CASE("evaluate rejects an unknown method") {
  const fs::path root = test_root() / "bad_method";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string events = (root / "events.jsonl").string();
  REQUIRE(run({"gen-synthetic", "--out", events}, small_args()) == 0);
  CHECK(run({"evaluate", "--events", events, "--model-dir", (root / "m").string(),
             "--report-dir", (root / "r").string(), "--methods", "popularity,bogus"},
            small_args()) == 2);
}

TEST_CASE("config file values act as defaults that flags override") {
  const fs::path root = test_root() / "config_precedence";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg_path = root / "run.cfg";
  std::ofstream(cfg_path) << "syn_users = 3\nsyn_items = 25\nsyn_list_length = 5\n"
                          << "syn_sessions_per_user = 2\n";

  const std::string events = (root / "events.jsonl").string();
  // config file shrinks the corpus; the flag overrides users back up
  CHECK(run_cli({"--config", cfg_path.string(), "--syn_users", "4", "gen-synthetic",
                 "--out", events}) == 0);
  std::istringstream lines(slurp(events));
  std::string line;
  bool saw_u0003 = false, saw_u0004 = false;
  while (std::getline(lines, line)) {
    if (line.find("u0003") != std::string::npos) saw_u0003 = true;
    if (line.find("u0004") != std::string::npos) saw_u0004 = true;
  }
  CHECK(saw_u0003);   // 4 users: u0000..u0003
  CHECK(!saw_u0004);
}
