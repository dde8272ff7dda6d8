#pragma once

#include <cstdint>
#include <vector>

#include "sessionrank/sie.hpp"

namespace sessionrank {

struct RankConfig {
  std::vector<std::size_t> proj_widths{100, 100};  // last must equal the S-IE repr dim
  std::size_t k = 10;
  double eta = 0.001;
  std::size_t iterations = 10;  // T in the learning loop
  std::uint64_t seed = 42;
  // Exact top-k enumeration is used while perm(n, k) stays under this cap;
  // beyond it the loss falls back to the top-1 distribution.
  std::size_t enumeration_cap = 5000;
  double label_temperature = 1.0;  // grades are divided by this before Eq.-style use

  void validate() const;
};

// List-wise ranker: item embeddings (pre-trained by S-IE, then fine-tuned)
// projected into the session space by a sigmoid MLP and scored against the
// session representation by dot product.
struct RankModel {
  RankConfig cfg;
  std::size_t repr_dim = 0;
  EmbeddingTable item_embeddings;
  std::vector<DenseLayer> projection;

  std::vector<ParamRef> params();
  std::vector<ParamRef> params() const;
};

// Copies the pre-trained item table out of the S-IE model and initializes
// fresh projection layers.
RankModel init_rank_model(const SieModel& sie, const RankConfig& cfg);

std::vector<double> project_item(const RankModel& model, long item,
                                 std::vector<DenseCache>* caches = nullptr);

// score(s, i) = s . projection(item embedding)
double score_item(std::span<const double> representation, const RankModel& model, long item);

// Ordered tuple of distinct candidate positions occupying ranks 1..k.
using TopKGroup = std::vector<std::size_t>;

// Plackett-Luce probability that the group occupies the top k ranks:
// product over steps of exp(score) normalized by the not-yet-placed items.
double topk_group_probability(std::span<const double> scores, const TopKGroup& group);

// Number of ordered k-tuples, saturating at cap+1 to avoid overflow.
std::size_t permutation_count(std::size_t n, std::size_t k, std::size_t cap);

// Cross entropy between the label- and score-induced top-k distributions.
// Exact enumeration while perm(n,k) <= enumeration_cap, otherwise the
// top-1 distributions are compared.
double listnet_loss(std::span<const double> scores, std::span<const int> labels,
                    std::size_t k, std::size_t enumeration_cap = 5000,
                    double label_temperature = 1.0);

// Loss plus its analytic gradient with respect to each score.
double listnet_loss_gradient(std::span<const double> scores, std::span<const int> labels,
                             std::size_t k, std::vector<double>& grad_scores,
                             std::size_t enumeration_cap = 5000,
                             double label_temperature = 1.0);

struct RankGradients {
  std::vector<DenseGrad> projection;
  std::unordered_map<std::size_t, std::vector<double>> item_rows;

  void match(const RankModel& model);
  void zero();
};

// List loss of one block given a frozen session representation, with
// gradients chained through the projection layers into the item rows.
double rank_loss_and_gradients(const RankModel& model, std::span<const double> representation,
                               const QueryBlock& block, RankGradients& grads);

void rank_apply_sgd(RankModel& model, const RankGradients& grads, double eta);

Gradients rank_dense_gradients(const RankModel& model, const RankGradients& grads);

struct RankTrainResult {
  RankModel model;
  std::vector<TrainLogRow> log;
};

// Algorithm: for t in 1..T, for each training block, score the shown list
// against the frozen S-IE representation and update projection + item
// embeddings by SGD on the list loss.
RankTrainResult train_listrank(const Dataset& dataset, const SieModel& sie,
                               const RankConfig& cfg);

// Final re-ranking of a block by score(s, i), ties stable by presentation
// order.
Ranking rank_items(const QueryBlock& block, const SieModel& sie, const RankModel& model);

}  // namespace sessionrank
