#include "sessionrank/listnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sessionrank {

void RankConfig::validate() const {
  require(!proj_widths.empty(), "rank config: proj_widths must be nonempty");
  for (std::size_t w : proj_widths) require(w > 0, "rank config: zero projection width");
  require(k >= 1, "rank config: k must be >= 1");
  require(eta > 0.0, "rank config: eta must be positive");
  require(label_temperature > 0.0, "rank config: label_temperature must be positive");
}

std::vector<ParamRef> RankModel::params() {
  std::vector<ParamRef> refs;
  refs.push_back({"items", &item_embeddings.vectors});
  for (std::size_t l = 0; l < projection.size(); ++l) {
    refs.push_back({"proj." + std::to_string(l) + ".w", &projection[l].weights});
    refs.push_back({"proj." + std::to_string(l) + ".b", &projection[l].bias});
  }
  return refs;
}

std::vector<ParamRef> RankModel::params() const {
  return const_cast<RankModel*>(this)->params();
}

RankModel init_rank_model(const SieModel& sie, const RankConfig& cfg) {
  cfg.validate();
  require(cfg.proj_widths.back() == sie.cfg.repr_dim(),
          "rank config: last projection width must match the session representation dim");
  RankModel m;
  m.cfg = cfg;
  m.repr_dim = sie.cfg.repr_dim();
  m.item_embeddings = sie.item_embeddings;  // pre-trained initialization

  Rng rng(cfg.seed ^ 0x11577a6bull);
  std::size_t in = sie.cfg.embedding_dim;
  for (std::size_t w : cfg.proj_widths) {
    DenseLayer layer(w, in, Activation::sigmoid);
    init_layer(layer, InitScheme::uniform_scaled, rng);
    m.projection.push_back(std::move(layer));
    in = w;
  }
  return m;
}

std::vector<double> project_item(const RankModel& model, long item,
                                 std::vector<DenseCache>* caches) {
  if (caches) caches->resize(model.projection.size());
  std::vector<double> x(model.item_embeddings.lookup(item).begin(),
                        model.item_embeddings.lookup(item).end());
  for (std::size_t l = 0; l < model.projection.size(); ++l) {
    x = dense_forward(model.projection[l], x, caches ? &(*caches)[l] : nullptr);
  }
  return x;
}

double score_item(std::span<const double> representation, const RankModel& model, long item) {
  const std::vector<double> projected = project_item(model, item);
  require(representation.size() == projected.size(),
          "score_item: representation dim != projected item dim");
  double dot = 0.0;
  for (std::size_t d = 0; d < projected.size(); ++d) dot += representation[d] * projected[d];
  return dot;
}

double topk_group_probability(std::span<const double> scores, const TopKGroup& group) {
  const std::size_t n = scores.size();
  require(!group.empty() && group.size() <= n, "topk_group_probability: bad group size");
  std::vector<bool> used(n, false);
  for (std::size_t j : group) {
    require(j < n, "topk_group_probability: index out of range");
    require(!used[j], "topk_group_probability: duplicate index in group");
    used[j] = true;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> e(n);
  double remaining = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = std::exp(scores[i] - mx);
    remaining += e[i];
  }
  double p = 1.0;
  for (std::size_t j : group) {
    p *= e[j] / remaining;
    remaining -= e[j];
  }
  return p;
}

std::size_t permutation_count(std::size_t n, std::size_t k, std::size_t cap) {
  std::size_t count = 1;
  for (std::size_t t = 0; t < k; ++t) {
    count *= n - t;
    if (count > cap) return cap + 1;
  }
  return count;
}

namespace {

std::vector<double> shifted_exp(std::span<const double> scores) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> e(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) e[i] = std::exp(scores[i] - mx);
  return e;
}

// Shared exact-enumeration walk over all ordered top-k groups. grad may be
// null for loss-only evaluation.
class TopKEnumerator {
 public:
  TopKEnumerator(std::span<const double> scores, std::span<const double> label_scores,
                 std::size_t k)
      : n_(scores.size()), k_(k), ez_(shifted_exp(scores)), ey_(shifted_exp(label_scores)) {}

  double run(std::vector<double>* grad) {
    grad_ = grad;
    if (grad_) grad_->assign(n_, 0.0);
    loss_ = 0.0;
    path_.assign(k_, 0);
    in_path_.assign(n_, false);
    sz_.assign(k_, 0.0);
    const double sum_ez = std::accumulate(ez_.begin(), ez_.end(), 0.0);
    const double sum_ey = std::accumulate(ey_.begin(), ey_.end(), 0.0);
    walk(0, 1.0, 0.0, sum_ey, sum_ez);
    return loss_;
  }

 private:
  void walk(std::size_t depth, double py, double log_pz, double sy, double sz) {
    if (depth == k_) {
      leaf(py, log_pz);
      return;
    }
    sz_[depth] = sz;
    for (std::size_t j = 0; j < n_; ++j) {
      if (in_path_[j]) continue;
      path_[depth] = j;
      in_path_[j] = true;
      walk(depth + 1, py * (ey_[j] / sy), log_pz + std::log(ez_[j] / sz), sy - ey_[j],
           sz - ez_[j]);
      in_path_[j] = false;
    }
  }

  void leaf(double py, double log_pz) {
    loss_ -= py * log_pz;
    if (!grad_) return;
    // d(-log Pz(g))/dz_m summed over the placement steps: each step t
    // contributes softmax over the still-unplaced items minus the
    // indicator of the item placed at t.
    for (std::size_t t = 0; t < k_; ++t) {
      (*grad_)[path_[t]] -= py;
      for (std::size_t m = 0; m < n_; ++m) {
        if (placed_before(m, t)) continue;
        (*grad_)[m] += py * ez_[m] / sz_[t];
      }
    }
  }

  bool placed_before(std::size_t m, std::size_t t) const {
    for (std::size_t u = 0; u < t; ++u) {
      if (path_[u] == m) return true;
    }
    return false;
  }

  std::size_t n_;
  std::size_t k_;
  std::vector<double> ez_;
  std::vector<double> ey_;
  std::vector<double>* grad_ = nullptr;
  double loss_ = 0.0;
  std::vector<std::size_t> path_;
  std::vector<bool> in_path_;
  std::vector<double> sz_;
};

std::vector<double> label_scores_of(std::span<const int> labels, double temperature) {
  std::vector<double> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = static_cast<double>(labels[i]) / temperature;
  }
  return y;
}

double topk_loss_impl(std::span<const double> scores, std::span<const int> labels,
                      std::size_t k, std::size_t cap, double temperature,
                      std::vector<double>* grad) {
  require(scores.size() == labels.size(), "listnet_loss: scores/labels length mismatch");
  require(!scores.empty(), "listnet_loss: empty list");
  if (k > scores.size()) {
    throw std::invalid_argument("listnet_loss: k exceeds list length");
  }
  const std::vector<double> y = label_scores_of(labels, temperature);
  if (permutation_count(scores.size(), k, cap) <= cap) {
    TopKEnumerator en(scores, y, k);
    return en.run(grad);
  }
  // Top-1 fallback: cross entropy between the two softmax distributions.
  const std::vector<double> py = softmax(y);
  const std::vector<double> pz = softmax(scores);
  if (grad) {
    grad->resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) (*grad)[i] = pz[i] - py[i];
  }
  return cross_entropy(py, pz);
}

}  // namespace

double listnet_loss(std::span<const double> scores, std::span<const int> labels,
                    std::size_t k, std::size_t enumeration_cap, double label_temperature) {
  return topk_loss_impl(scores, labels, k, enumeration_cap, label_temperature, nullptr);
}

double listnet_loss_gradient(std::span<const double> scores, std::span<const int> labels,
                             std::size_t k, std::vector<double>& grad_scores,
                             std::size_t enumeration_cap, double label_temperature) {
  return topk_loss_impl(scores, labels, k, enumeration_cap, label_temperature, &grad_scores);
}

void RankGradients::match(const RankModel& model) {
  projection.resize(model.projection.size());
  for (std::size_t l = 0; l < model.projection.size(); ++l) {
    projection[l].match(model.projection[l]);
  }
}

void RankGradients::zero() {
  for (auto& g : projection) g.zero();
  item_rows.clear();
}

double rank_loss_and_gradients(const RankModel& model, std::span<const double> representation,
                               const QueryBlock& block, RankGradients& grads) {
  grads.match(model);
  grads.zero();
  const std::size_t n = block.shown_idx.size();
  require(n > 0, "rank_loss_and_gradients: empty block");

  std::vector<std::vector<DenseCache>> caches(n);
  std::vector<double> scores(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::vector<double> q = project_item(model, block.shown_idx[j], &caches[j]);
    require(q.size() == representation.size(), "rank model/representation dim mismatch");
    double dot = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) dot += representation[d] * q[d];
    scores[j] = dot;
  }

  const std::size_t k_eff = std::min(model.cfg.k, n);
  std::vector<double> dscores;
  const double loss = listnet_loss_gradient(scores, block.labels, k_eff, dscores,
                                            model.cfg.enumeration_cap,
                                            model.cfg.label_temperature);

  std::vector<double> dq(representation.size());
  for (std::size_t j = 0; j < n; ++j) {
    if (dscores[j] == 0.0) continue;
    for (std::size_t d = 0; d < dq.size(); ++d) dq[d] = dscores[j] * representation[d];
    std::vector<double> g(dq);
    for (std::size_t l = model.projection.size(); l-- > 0;) {
      g = dense_backward(model.projection[l], caches[j][l], g, grads.projection[l]);
    }
    const std::size_t row = model.item_embeddings.resolve(block.shown_idx[j]);
    auto& rg = grads.item_rows[row];
    if (rg.empty()) rg.assign(g.size(), 0.0);
    for (std::size_t d = 0; d < g.size(); ++d) rg[d] += g[d];
  }
  return loss;
}

void rank_apply_sgd(RankModel& model, const RankGradients& grads, double eta) {
  for (std::size_t l = 0; l < model.projection.size(); ++l) {
    sgd_step(model.projection[l], grads.projection[l], eta);
  }
  for (const auto& [row, g] : grads.item_rows) {
    auto target = model.item_embeddings.vectors.row(row);
    for (std::size_t d = 0; d < g.size(); ++d) target[d] -= eta * g[d];
  }
}

Gradients rank_dense_gradients(const RankModel& model, const RankGradients& grads) {
  Gradients dense;
  dense.match(model.params());
  dense.zero();
  Matrix& items = dense.at("items");
  for (const auto& [row, g] : grads.item_rows) {
    auto target = items.row(row);
    for (std::size_t d = 0; d < g.size(); ++d) target[d] += g[d];
  }
  for (std::size_t l = 0; l < grads.projection.size(); ++l) {
    dense.at("proj." + std::to_string(l) + ".w") = grads.projection[l].weights;
    dense.at("proj." + std::to_string(l) + ".b") = grads.projection[l].bias;
  }
  return dense;
}

RankTrainResult train_listrank(const Dataset& dataset, const SieModel& sie,
                               const RankConfig& cfg) {
  RankTrainResult result;
  result.model = init_rank_model(sie, cfg);
  if (dataset.train.empty()) throw DataError("train_listrank: empty train split");

  // The S-IE side is frozen, so each block's representation is fixed for
  // the whole run.
  std::vector<std::vector<double>> reps = extract_representations(dataset.train, sie);

  RankGradients grads;
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < dataset.train.size(); ++i) {
      const QueryBlock& block = dataset.train[i];
      const double loss = rank_loss_and_gradients(result.model, reps[i], block, grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("train_listrank: non-finite loss at iteration " +
                             std::to_string(t) + ", session " + block.session_id);
      }
      loss_sum += loss;
      rank_apply_sgd(result.model, grads, cfg.eta);
    }
    const double mean_loss = loss_sum / static_cast<double>(dataset.train.size());
    result.log.push_back({t, mean_loss, 0.0});
  }
  return result;
}

Ranking rank_items(const QueryBlock& block, const SieModel& sie, const RankModel& model) {
  const std::vector<double> s = extract_representation(block, sie);
  Ranking r;
  const std::size_t n = block.shown_idx.size();
  r.scores.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    r.scores[j] = score_item(s, model, block.shown_idx[j]);
  }
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&r](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
  return r;
}

}  // namespace sessionrank
