#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sessionrank/listnet.hpp"

namespace sessionrank {

enum class GainKind { linear, exponential };  // gain(y) = y, or 2^y - 1

inline constexpr std::size_t kNdcgNoCutoff = 0;

// DCG with log2(p+1) discount over the first `cutoff` ranks (0 = all).
double dcg(std::span<const int> ranked_labels, std::size_t cutoff, GainKind gain);

// DCG / ideal DCG. Queries with no positive label (IDCG = 0) have no
// defined score and return nullopt; averaging excludes them.
std::optional<double> ndcg(std::span<const int> ranked_labels, std::size_t cutoff,
                           GainKind gain = GainKind::linear);

// A ranker maps a block to the order in which its shown positions should
// be presented.
using Ranker = std::function<std::vector<std::size_t>(const QueryBlock&)>;

// Items sorted by train-set click count descending, ties by item id.
Ranker popularity_baseline(const std::vector<QueryBlock>& train_blocks);
std::vector<std::pair<std::string, std::size_t>> popularity_counts(
    const std::vector<QueryBlock>& train_blocks);

Ranker sie_ranker(const SieModel& model);
Ranker listrank_ranker(const SieModel& sie, const RankModel& model);

struct PerQueryScore {
  std::string query_id;
  std::optional<double> ndcg_at_all;
  std::optional<double> ndcg_at_10;
};

struct EvalReport {
  std::string method;
  double ndcg_at_all = 0.0;
  double ndcg_at_10 = 0.0;
  std::size_t n_queries = 0;   // queries included in the averages
  std::size_t n_excluded = 0;  // IDCG = 0 or empty
  std::vector<PerQueryScore> per_query;
};

// Ranks every test block and averages NDCG@all / NDCG@10 over the queries
// with a defined score. `threads` bounds the block-level parallelism.
EvalReport evaluate(const std::string& method, const Ranker& ranker,
                    const std::vector<QueryBlock>& test_blocks,
                    GainKind gain = GainKind::linear, std::size_t threads = 1);

std::string report_to_json(const EvalReport& r, bool include_per_query = false);
std::string report_to_csv_row(const EvalReport& r);

enum class AblationCell { none, click_only, view_only, both };
const char* to_string(AblationCell cell);

struct AblationResult {
  // [cell][method]: method 0 = SIE, 1 = ListRank
  double ndcg[4][2] = {};
  std::vector<EvalReport> reports;
};

// Retrains S-IE (and ListRank on top) once per behavior mask and
// evaluates both methods, mirroring the 4x2 behavior-ablation grid.
AblationResult run_ablation(const Dataset& dataset, const SieConfig& sie_cfg,
                            const RankConfig& rank_cfg, GainKind gain = GainKind::linear,
                            std::size_t threads = 1);

std::string ablation_to_text(const AblationResult& a);
std::string ablation_to_csv(const AblationResult& a);

// One-sided sign test: probability of >= `wins` successes in `n` fair
// coin flips.
double sign_test_p(std::size_t wins, std::size_t n);

}  // namespace sessionrank
