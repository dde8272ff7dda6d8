#include "sessionrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace sessionrank {

namespace {

double gain_of(int label, GainKind gain) {
  return gain == GainKind::linear ? static_cast<double>(label)
                                  : std::pow(2.0, static_cast<double>(label)) - 1.0;
}

}  // namespace

double dcg(std::span<const int> ranked_labels, std::size_t cutoff, GainKind gain) {
  const std::size_t n = cutoff == kNdcgNoCutoff
                            ? ranked_labels.size()
                            : std::min(cutoff, ranked_labels.size());
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    sum += gain_of(ranked_labels[p], gain) / std::log2(static_cast<double>(p) + 2.0);
  }
  return sum;
}

std::optional<double> ndcg(std::span<const int> ranked_labels, std::size_t cutoff,
                           GainKind gain) {
  if (ranked_labels.empty()) return std::nullopt;
  std::vector<int> ideal(ranked_labels.begin(), ranked_labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  const double idcg = dcg(ideal, cutoff, gain);
  if (idcg <= 0.0) return std::nullopt;
  return dcg(ranked_labels, cutoff, gain) / idcg;
}

std::vector<std::pair<std::string, std::size_t>> popularity_counts(
    const std::vector<QueryBlock>& train_blocks) {
  std::map<std::string, std::size_t> counts;
  for (const QueryBlock& b : train_blocks) {
    for (std::size_t i = 0; i < b.shown_items.size(); ++i) {
      if (b.labels[i] >= 1) ++counts[b.shown_items[i]];
    }
  }
  return {counts.begin(), counts.end()};
}

Ranker popularity_baseline(const std::vector<QueryBlock>& train_blocks) {
  auto counts = std::make_shared<std::map<std::string, std::size_t>>();
  for (auto& [item, n] : popularity_counts(train_blocks)) (*counts)[item] = n;
  return [counts](const QueryBlock& block) {
    std::vector<std::size_t> order(block.shown_items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      auto ca = counts->find(block.shown_items[a]);
      auto cb = counts->find(block.shown_items[b]);
      const std::size_t na = ca == counts->end() ? 0 : ca->second;
      const std::size_t nb = cb == counts->end() ? 0 : cb->second;
      if (na != nb) return na > nb;
      return block.shown_items[a] < block.shown_items[b];
    });
    return order;
  };
}

Ranker sie_ranker(const SieModel& model) {
  return [&model](const QueryBlock& block) { return sie_rank(block, model).order; };
}

Ranker listrank_ranker(const SieModel& sie, const RankModel& model) {
  return [&sie, &model](const QueryBlock& block) {
    return rank_items(block, sie, model).order;
  };
}

EvalReport evaluate(const std::string& method, const Ranker& ranker,
                    const std::vector<QueryBlock>& test_blocks, GainKind gain,
                    std::size_t threads) {
  EvalReport report;
  report.method = method;
  report.per_query.resize(test_blocks.size());

  auto score_block = [&](std::size_t i) {
    const QueryBlock& block = test_blocks[i];
    const std::vector<std::size_t> order = ranker(block);
    std::vector<int> ranked(order.size());
    for (std::size_t p = 0; p < order.size(); ++p) ranked[p] = block.labels[order[p]];
    report.per_query[i] = {block.query_id, ndcg(ranked, kNdcgNoCutoff, gain),
                           ndcg(ranked, 10, gain)};
  };

  if (threads <= 1 || test_blocks.size() < 2) {
    for (std::size_t i = 0; i < test_blocks.size(); ++i) score_block(i);
  } else {
    const std::size_t n_threads = std::min(threads, test_blocks.size());
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t]() {
        for (std::size_t i = t; i < test_blocks.size(); i += n_threads) score_block(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  double sum_all = 0.0, sum_10 = 0.0;
  for (const auto& q : report.per_query) {
    if (!q.ndcg_at_all) {
      ++report.n_excluded;
      continue;
    }
    ++report.n_queries;
    sum_all += *q.ndcg_at_all;
    sum_10 += q.ndcg_at_10.value_or(0.0);
  }
  if (report.n_queries > 0) {
    report.ndcg_at_all = sum_all / static_cast<double>(report.n_queries);
    report.ndcg_at_10 = sum_10 / static_cast<double>(report.n_queries);
  }
  return report;
}

std::string report_to_json(const EvalReport& r, bool include_per_query) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["ndcg_at_all"] = r.ndcg_at_all;
  j["ndcg_at_10"] = r.ndcg_at_10;
  j["n_queries"] = r.n_queries;
  j["n_excluded"] = r.n_excluded;
  if (include_per_query) {
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& q : r.per_query) {
      nlohmann::ordered_json e;
      e["query_id"] = q.query_id;
      if (q.ndcg_at_all) {
        e["ndcg_at_all"] = *q.ndcg_at_all;
        e["ndcg_at_10"] = *q.ndcg_at_10;
      } else {
        e["excluded"] = true;
      }
      per.push_back(std::move(e));
    }
    j["per_query"] = std::move(per);
  }
  return j.dump(2);
}

std::string report_to_csv_row(const EvalReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << r.method << ',' << r.ndcg_at_all << ',' << r.ndcg_at_10 << ',' << r.n_queries << ','
      << r.n_excluded << '\n';
  return out.str();
}

const char* to_string(AblationCell cell) {
  switch (cell) {
    case AblationCell::none:
      return "no click & view";
    case AblationCell::click_only:
      return "only click";
    case AblationCell::view_only:
      return "only view";
    case AblationCell::both:
      return "both";
  }
  return "?";
}

AblationResult run_ablation(const Dataset& dataset, const SieConfig& sie_cfg,
                            const RankConfig& rank_cfg, GainKind gain, std::size_t threads) {
  AblationResult result;
  const AblationCell cells[4] = {AblationCell::none, AblationCell::click_only,
                                 AblationCell::view_only, AblationCell::both};
  for (int c = 0; c < 4; ++c) {
    SieConfig cfg = sie_cfg;
    switch (cells[c]) {
      case AblationCell::none:
        cfg.mask = {false, false};
        break;
      case AblationCell::click_only:
        cfg.mask = {true, false};
        break;
      case AblationCell::view_only:
        cfg.mask = {false, true};
        break;
      case AblationCell::both:
        cfg.mask = {true, true};
        break;
    }
    SieTrainResult sie = train_sie(dataset, cfg);
    RankTrainResult rank = train_listrank(dataset, sie.model, rank_cfg);

    const std::string suffix = std::string(" [") + to_string(cells[c]) + "]";
    EvalReport sie_report =
        evaluate("SIE" + suffix, sie_ranker(sie.model), dataset.test, gain, threads);
    EvalReport rank_report = evaluate(
        "ListRank" + suffix, listrank_ranker(sie.model, rank.model), dataset.test, gain,
        threads);
    result.ndcg[c][0] = sie_report.ndcg_at_all;
    result.ndcg[c][1] = rank_report.ndcg_at_all;
    result.reports.push_back(std::move(sie_report));
    result.reports.push_back(std::move(rank_report));
  }
  return result;
}

std::string ablation_to_text(const AblationResult& a) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << std::left << std::setw(10) << "" << std::right;
  for (int c = 0; c < 4; ++c) {
    out << std::setw(17) << to_string(static_cast<AblationCell>(c));
  }
  out << '\n';
  const char* methods[2] = {"SIE", "ListRank"};
  for (int m = 0; m < 2; ++m) {
    out << std::left << std::setw(10) << methods[m] << std::right;
    for (int c = 0; c < 4; ++c) out << std::setw(17) << a.ndcg[c][m];
    out << '\n';
  }
  return out.str();
}

std::string ablation_to_csv(const AblationResult& a) {
  std::ostringstream out;
  out.precision(17);
  out << "method,no click & view,only click,only view,both\n";
  const char* methods[2] = {"SIE", "ListRank"};
  for (int m = 0; m < 2; ++m) {
    out << methods[m];
    for (int c = 0; c < 4; ++c) out << ',' << a.ndcg[c][m];
    out << '\n';
  }
  return out.str();
}

double sign_test_p(std::size_t wins, std::size_t n) {
  double p = 0.0;
  for (std::size_t i = wins; i <= n; ++i) {
    double binom = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      binom *= static_cast<double>(n - j) / static_cast<double>(j + 1);
    }
    p += binom;
  }
  return p * std::pow(0.5, static_cast<double>(n));
}

}  // namespace sessionrank
