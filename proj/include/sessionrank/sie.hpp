#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sessionrank/dataset.hpp"
#include "sessionrank/nn.hpp"

namespace sessionrank {

// Which behavior segments of the session feature are active. Zeroed
// segments keep their 200 dims, so all four ablation cells share one
// architecture.
struct FeatureMask {
  bool clicks = true;
  bool views = true;
};

// Item segment used when extracting a candidate-independent session
// representation.
enum class ReprItemMode { zero, mean_of_shown };

struct SieConfig {
  std::size_t embedding_dim = 200;
  std::vector<std::size_t> mlp_widths{800, 200, 100};
  Pooling pooling = Pooling::average;
  FeatureMask mask;
  bool use_user_embedding = false;   // off: every sample shares the OOV user row
  bool separate_view_table = false;  // off: views share the item embedding table
  bool purchases_as_clicks = false;  // on: preceding purchases join the click segment
  ReprItemMode repr_item = ReprItemMode::zero;
  int neg_ratio = 5;
  int purchase_copies = 3;
  double eta = 0.001;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;

  std::size_t input_dim() const { return 4 * embedding_dim; }
  std::size_t repr_dim() const { return mlp_widths.back(); }
  void validate() const;
};

// Session Information Embedding model: behavior-pooled features through a
// relu MLP with a two-class softmax head. The last relu layer doubles as
// the session representation.
struct SieModel {
  SieConfig cfg;
  EmbeddingTable item_embeddings;
  EmbeddingTable user_embeddings;
  EmbeddingTable view_embeddings;  // empty unless cfg.separate_view_table
  std::vector<DenseLayer> mlp;
  DenseLayer head;  // identity, width 2; softmax applied on top

  std::vector<ParamRef> params();
  std::vector<ParamRef> params() const;

  const EmbeddingTable& view_table() const {
    return cfg.separate_view_table ? view_embeddings : item_embeddings;
  }
};

SieModel init_sie(const SieConfig& cfg, std::size_t item_vocab, std::size_t user_vocab);

// Sentinels for the candidate-item segment of a feature.
inline constexpr long kItemSegmentZero = -1;
inline constexpr long kItemSegmentMeanOfShown = -2;

struct FeatureCache {
  std::vector<std::size_t> click_rows;
  std::vector<std::size_t> view_rows;
  PoolCache click_pool;
  PoolCache view_pool;
  std::size_t user_row = 0;
  long item_row = kItemSegmentZero;  // >= 0: embedding row, else sentinel
  std::vector<double> feature;
};

// concat[pool(click embeddings), pool(view embeddings), user embedding,
// item segment]. `item` is a vocab index, or one of the sentinels above.
std::vector<double> build_session_feature(const SieModel& model, const QueryBlock& block,
                                          long item, FeatureCache* cache = nullptr);

// One supervised example: did the user click this shown item?
struct SieSample {
  const QueryBlock* block = nullptr;
  int target_item = 0;  // vocab index
  bool positive = false;
};

// Positives: clicked items once, purchased items purchase_copies times
// total. Negatives: per block, shown-but-unclicked items sampled without
// replacement at neg_ratio per positive, capped by availability.
std::vector<SieSample> make_training_samples(const std::vector<QueryBlock>& blocks,
                                             const SieConfig& cfg, Rng& rng);

struct SieForward {
  FeatureCache feature;
  std::vector<DenseCache> mlp_caches;
  DenseCache head_cache;
  std::vector<double> probs;  // P(negative), P(positive)

  const std::vector<double>& representation() const { return mlp_caches.back().output; }
};

// Returns class probabilities; the cached last relu output is the session
// representation.
std::vector<double> sie_forward(const SieModel& model, const QueryBlock& block, long item,
                                SieForward* fwd = nullptr);

struct SieGradients {
  std::vector<DenseGrad> mlp;
  DenseGrad head;
  std::unordered_map<std::size_t, std::vector<double>> item_rows;
  std::unordered_map<std::size_t, std::vector<double>> user_rows;
  std::unordered_map<std::size_t, std::vector<double>> view_rows;

  void match(const SieModel& model);
  void zero();
};

// Cross-entropy loss of one sample plus its parameter gradients.
// When given, probs_out receives the sample's class probabilities.
double sie_loss_and_gradients(const SieModel& model, const SieSample& sample,
                              SieGradients& grads, std::vector<double>* probs_out = nullptr);

void sie_apply_sgd(SieModel& model, const SieGradients& grads, double eta);

// Densifies sparse embedding-row gradients into full tables for the
// finite-difference checker.
Gradients sie_dense_gradients(const SieModel& model, const SieGradients& grads);

struct TrainLogRow {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

std::string train_log_to_csv(const std::vector<TrainLogRow>& log);

struct SieTrainResult {
  SieModel model;
  std::vector<TrainLogRow> log;
};

// SGD over shuffled samples; keeps the epoch snapshot with the best mean
// loss. Throws NumericalError if the loss diverges.
SieTrainResult train_sie(const Dataset& dataset, const SieConfig& cfg);

// Ranking of one block: order[i] is the original position of the rank-i
// item; scores align with original positions.
struct Ranking {
  std::vector<std::size_t> order;
  std::vector<double> scores;
};

// Coarse ranking by positive-class probability, ties stable by
// presentation order.
Ranking sie_rank(const QueryBlock& block, const SieModel& model);

// Candidate-independent session representation (item segment per
// cfg.repr_item).
std::vector<double> extract_representation(const QueryBlock& block, const SieModel& model);
std::vector<std::vector<double>> extract_representations(const std::vector<QueryBlock>& blocks,
                                                         const SieModel& model);

}  // namespace sessionrank
