#include "sessionrank/sie.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

namespace sessionrank {

void SieConfig::validate() const {
  require(embedding_dim > 0, "sie config: embedding_dim must be positive");
  require(!mlp_widths.empty(), "sie config: mlp_widths must be nonempty");
  for (std::size_t w : mlp_widths) require(w > 0, "sie config: zero mlp width");
  require(eta > 0.0, "sie config: eta must be positive");
  require(neg_ratio >= 0, "sie config: neg_ratio must be >= 0");
  require(purchase_copies >= 1, "sie config: purchase_copies must be >= 1");
}

std::vector<ParamRef> SieModel::params() {
  std::vector<ParamRef> refs;
  refs.push_back({"items", &item_embeddings.vectors});
  refs.push_back({"users", &user_embeddings.vectors});
  if (cfg.separate_view_table) refs.push_back({"views", &view_embeddings.vectors});
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    refs.push_back({"mlp." + std::to_string(l) + ".w", &mlp[l].weights});
    refs.push_back({"mlp." + std::to_string(l) + ".b", &mlp[l].bias});
  }
  refs.push_back({"head.w", &head.weights});
  refs.push_back({"head.b", &head.bias});
  return refs;
}

std::vector<ParamRef> SieModel::params() const {
  return const_cast<SieModel*>(this)->params();
}

SieModel init_sie(const SieConfig& cfg, std::size_t item_vocab, std::size_t user_vocab) {
  cfg.validate();
  SieModel m;
  m.cfg = cfg;
  Rng rng(cfg.seed);

  m.item_embeddings = EmbeddingTable(item_vocab, cfg.embedding_dim);
  m.item_embeddings.vectors =
      init_params(item_vocab, cfg.embedding_dim, InitScheme::uniform_scaled, rng);
  m.user_embeddings = EmbeddingTable(user_vocab, cfg.embedding_dim);
  m.user_embeddings.vectors =
      init_params(user_vocab, cfg.embedding_dim, InitScheme::uniform_scaled, rng);
  if (cfg.separate_view_table) {
    m.view_embeddings = EmbeddingTable(item_vocab, cfg.embedding_dim);
    m.view_embeddings.vectors =
        init_params(item_vocab, cfg.embedding_dim, InitScheme::uniform_scaled, rng);
  }

  std::size_t in = cfg.input_dim();
  for (std::size_t w : cfg.mlp_widths) {
    DenseLayer layer(w, in, Activation::relu);
    init_layer(layer, InitScheme::uniform_scaled, rng);
    m.mlp.push_back(std::move(layer));
    in = w;
  }
  m.head = DenseLayer(2, in, Activation::identity);
  init_layer(m.head, InitScheme::uniform_scaled, rng);
  return m;
}

namespace {

void write_segment(std::vector<double>& feature, std::size_t segment, std::size_t dim,
                   std::span<const double> values) {
  std::copy(values.begin(), values.end(), feature.begin() + segment * dim);
}

}  // namespace

std::vector<double> build_session_feature(const SieModel& model, const QueryBlock& block,
                                          long item, FeatureCache* cache) {
  const SieConfig& cfg = model.cfg;
  const std::size_t dim = cfg.embedding_dim;
  FeatureCache local;
  FeatureCache& fc = cache ? *cache : local;
  fc.click_rows.clear();
  fc.view_rows.clear();
  fc.feature.assign(cfg.input_dim(), 0.0);

  if (cfg.mask.clicks) {
    std::vector<std::span<const double>> rows;
    auto add = [&](const std::vector<int>& ids) {
      for (int id : ids) {
        const std::size_t r = model.item_embeddings.resolve(id);
        fc.click_rows.push_back(r);
        rows.push_back(model.item_embeddings.vectors.row(r));
      }
    };
    add(block.click_idx);
    if (cfg.purchases_as_clicks) add(block.purchase_idx);
    write_segment(fc.feature, 0, dim, pool(rows, cfg.pooling, dim, fc.click_pool));
  } else {
    fc.click_pool = PoolCache{cfg.pooling, 0, {}};
  }

  if (cfg.mask.views) {
    const EmbeddingTable& table = model.view_table();
    std::vector<std::span<const double>> rows;
    for (int id : block.view_idx) {
      const std::size_t r = table.resolve(id);
      fc.view_rows.push_back(r);
      rows.push_back(table.vectors.row(r));
    }
    write_segment(fc.feature, 1, dim, pool(rows, cfg.pooling, dim, fc.view_pool));
  } else {
    fc.view_pool = PoolCache{cfg.pooling, 0, {}};
  }

  fc.user_row =
      cfg.use_user_embedding ? model.user_embeddings.resolve(block.user_idx) : std::size_t{0};
  write_segment(fc.feature, 2, dim, model.user_embeddings.vectors.row(fc.user_row));

  fc.item_row = item;
  if (item >= 0) {
    const std::size_t r = model.item_embeddings.resolve(item);
    fc.item_row = static_cast<long>(r);
    write_segment(fc.feature, 3, dim, model.item_embeddings.vectors.row(r));
  } else if (item == kItemSegmentMeanOfShown) {
    std::vector<std::span<const double>> rows;
    rows.reserve(block.shown_idx.size());
    for (int id : block.shown_idx) {
      rows.push_back(model.item_embeddings.vectors.row(model.item_embeddings.resolve(id)));
    }
    write_segment(fc.feature, 3, dim, pool(rows, Pooling::average, dim));
  }
  return fc.feature;
}

std::vector<SieSample> make_training_samples(const std::vector<QueryBlock>& blocks,
                                             const SieConfig& cfg, Rng& rng) {
  std::vector<SieSample> samples;
  std::size_t empty_blocks = 0;
  for (const QueryBlock& block : blocks) {
    if (block.shown_items.empty()) {
      ++empty_blocks;
      continue;
    }
    std::size_t n_pos = 0;
    std::vector<int> unclicked;
    for (std::size_t i = 0; i < block.shown_idx.size(); ++i) {
      const int label = block.labels[i];
      const int idx = block.shown_idx[i];
      if (label == 2) {
        for (int c = 0; c < cfg.purchase_copies; ++c) {
          samples.push_back({&block, idx, true});
        }
        n_pos += cfg.purchase_copies;
      } else if (label == 1) {
        samples.push_back({&block, idx, true});
        ++n_pos;
      } else {
        unclicked.push_back(idx);
      }
    }
    if (n_pos == 0) continue;
    const std::size_t want =
        std::min(unclicked.size(), n_pos * static_cast<std::size_t>(cfg.neg_ratio));
    for (std::size_t k = 0; k < want; ++k) {
      const std::size_t at = k + rng.below(unclicked.size() - k);
      std::swap(unclicked[k], unclicked[at]);
      samples.push_back({&block, unclicked[k], false});
    }
  }
  if (empty_blocks > 0) {
    std::cerr << "warning: skipped " << empty_blocks << " blocks with no shown items\n";
  }
  return samples;
}

std::vector<double> sie_forward(const SieModel& model, const QueryBlock& block, long item,
                                SieForward* fwd) {
  SieForward local;
  SieForward& f = fwd ? *fwd : local;
  f.mlp_caches.resize(model.mlp.size());
  std::vector<double> x = build_session_feature(model, block, item, &f.feature);
  for (std::size_t l = 0; l < model.mlp.size(); ++l) {
    x = dense_forward(model.mlp[l], x, &f.mlp_caches[l]);
  }
  x = dense_forward(model.head, x, &f.head_cache);
  f.probs = softmax(x);
  return f.probs;
}

void SieGradients::match(const SieModel& model) {
  mlp.resize(model.mlp.size());
  for (std::size_t l = 0; l < model.mlp.size(); ++l) mlp[l].match(model.mlp[l]);
  head.match(model.head);
}

void SieGradients::zero() {
  for (auto& g : mlp) g.zero();
  head.zero();
  item_rows.clear();
  user_rows.clear();
  view_rows.clear();
}

namespace {

void add_row_grad(std::unordered_map<std::size_t, std::vector<double>>& rows, std::size_t row,
                  std::span<const double> grad) {
  auto& g = rows[row];
  if (g.empty()) g.assign(grad.size(), 0.0);
  for (std::size_t d = 0; d < grad.size(); ++d) g[d] += grad[d];
}

// Routes a pooled segment's gradient back through the pool to each
// contributing embedding row.
void segment_pool_backward(std::span<const double> seg_grad, const PoolCache& pool_cache,
                           const std::vector<std::size_t>& used_rows,
                           std::unordered_map<std::size_t, std::vector<double>>& out) {
  if (used_rows.empty()) return;
  std::vector<std::vector<double>> scratch(used_rows.size(),
                                           std::vector<double>(seg_grad.size(), 0.0));
  std::vector<std::span<double>> spans;
  spans.reserve(scratch.size());
  for (auto& s : scratch) spans.push_back(s);
  pool_backward(seg_grad, pool_cache, spans);
  for (std::size_t i = 0; i < used_rows.size(); ++i) {
    add_row_grad(out, used_rows[i], scratch[i]);
  }
}

}  // namespace

double sie_loss_and_gradients(const SieModel& model, const SieSample& sample,
                              SieGradients& grads, std::vector<double>* probs_out) {
  grads.match(model);
  grads.zero();

  SieForward fwd;
  sie_forward(model, *sample.block, sample.target_item, &fwd);
  if (probs_out) *probs_out = fwd.probs;
  const std::vector<double> target =
      sample.positive ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
  const double loss = cross_entropy(target, fwd.probs);

  // Softmax + cross entropy: d(loss)/d(logit) = p - t.
  std::vector<double> grad{fwd.probs[0] - target[0], fwd.probs[1] - target[1]};
  grad = dense_backward(model.head, fwd.head_cache, grad, grads.head);
  for (std::size_t l = model.mlp.size(); l-- > 0;) {
    grad = dense_backward(model.mlp[l], fwd.mlp_caches[l], grad, grads.mlp[l]);
  }

  const std::size_t dim = model.cfg.embedding_dim;
  const std::span<const double> gfeat(grad);
  segment_pool_backward(gfeat.subspan(0, dim), fwd.feature.click_pool,
                        fwd.feature.click_rows, grads.item_rows);
  segment_pool_backward(gfeat.subspan(dim, dim), fwd.feature.view_pool, fwd.feature.view_rows,
                        model.cfg.separate_view_table ? grads.view_rows : grads.item_rows);
  add_row_grad(grads.user_rows, fwd.feature.user_row, gfeat.subspan(2 * dim, dim));
  if (fwd.feature.item_row >= 0) {
    add_row_grad(grads.item_rows, static_cast<std::size_t>(fwd.feature.item_row),
                 gfeat.subspan(3 * dim, dim));
  }
  return loss;
}

void sie_apply_sgd(SieModel& model, const SieGradients& grads, double eta) {
  for (std::size_t l = 0; l < model.mlp.size(); ++l) {
    sgd_step(model.mlp[l], grads.mlp[l], eta);
  }
  sgd_step(model.head, grads.head, eta);
  auto apply_rows = [eta](Matrix& table,
                          const std::unordered_map<std::size_t, std::vector<double>>& rows) {
    for (const auto& [row, g] : rows) {
      auto target = table.row(row);
      for (std::size_t d = 0; d < g.size(); ++d) target[d] -= eta * g[d];
    }
  };
  apply_rows(model.item_embeddings.vectors, grads.item_rows);
  apply_rows(model.user_embeddings.vectors, grads.user_rows);
  if (model.cfg.separate_view_table) {
    apply_rows(model.view_embeddings.vectors, grads.view_rows);
  }
}

Gradients sie_dense_gradients(const SieModel& model, const SieGradients& grads) {
  Gradients dense;
  dense.match(model.params());
  dense.zero();
  auto densify = [&dense](const std::string& name,
                          const std::unordered_map<std::size_t, std::vector<double>>& rows) {
    Matrix& m = dense.at(name);
    for (const auto& [row, g] : rows) {
      auto target = m.row(row);
      for (std::size_t d = 0; d < g.size(); ++d) target[d] += g[d];
    }
  };
  densify("items", grads.item_rows);
  densify("users", grads.user_rows);
  if (model.cfg.separate_view_table) densify("views", grads.view_rows);
  for (std::size_t l = 0; l < grads.mlp.size(); ++l) {
    dense.at("mlp." + std::to_string(l) + ".w") = grads.mlp[l].weights;
    dense.at("mlp." + std::to_string(l) + ".b") = grads.mlp[l].bias;
  }
  dense.at("head.w") = grads.head.weights;
  dense.at("head.b") = grads.head.bias;
  return dense;
}

std::string train_log_to_csv(const std::vector<TrainLogRow>& log) {
  std::ostringstream out;
  out << "epoch,mean_loss,accuracy\n";
  out.precision(17);
  for (const auto& row : log) {
    out << row.epoch << ',' << row.mean_loss << ',' << row.accuracy << '\n';
  }
  return out.str();
}

SieTrainResult train_sie(const Dataset& dataset, const SieConfig& cfg) {
  cfg.validate();
  SieModel model = init_sie(cfg, dataset.item_vocab.size(), dataset.user_vocab.size());
  Rng rng(cfg.seed ^ 0x5e55104ull);
  std::vector<SieSample> samples = make_training_samples(dataset.train, cfg, rng);
  if (samples.empty()) throw DataError("train_sie: no training samples");

  SieTrainResult result;
  SieModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();

  SieGradients grads;
  std::vector<double> probs;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(samples);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const SieSample& sample : samples) {
      loss_sum += sie_loss_and_gradients(model, sample, grads, &probs);
      if ((probs[1] > probs[0]) == sample.positive) ++correct;
      sie_apply_sgd(model, grads, cfg.eta);
    }
    const double mean_loss = loss_sum / static_cast<double>(samples.size());
    if (!std::isfinite(mean_loss)) {
      throw NumericalError("train_sie: loss diverged at epoch " + std::to_string(epoch));
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    result.log.push_back({epoch, mean_loss, accuracy});
    if (mean_loss < best_loss) {
      best_loss = mean_loss;
      best = model;
    }
  }
  result.model = cfg.epochs == 0 ? model : best;
  return result;
}

Ranking sie_rank(const QueryBlock& block, const SieModel& model) {
  Ranking r;
  const std::size_t n = block.shown_idx.size();
  r.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.scores[i] = sie_forward(model, block, block.shown_idx[i])[1];
  }
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&r](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
  return r;
}

std::vector<double> extract_representation(const QueryBlock& block, const SieModel& model) {
  SieForward fwd;
  const long item = model.cfg.repr_item == ReprItemMode::zero ? kItemSegmentZero
                                                              : kItemSegmentMeanOfShown;
  sie_forward(model, block, item, &fwd);
  return fwd.representation();
}

std::vector<std::vector<double>> extract_representations(const std::vector<QueryBlock>& blocks,
                                                         const SieModel& model) {
  std::vector<std::vector<double>> out;
  out.reserve(blocks.size());
  for (const QueryBlock& b : blocks) out.push_back(extract_representation(b, model));
  return out;
}

}  // namespace sessionrank
