#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sessionrank/sie.hpp"
#include "sessionrank/synthetic.hpp"

using namespace sessionrank;

namespace {

SieConfig small_config() {
  SieConfig cfg;
  cfg.embedding_dim = 4;
  cfg.mlp_widths = {8, 6, 5};
  cfg.seed = 7;
  return cfg;
}

QueryBlock make_block(std::vector<int> shown, std::vector<int> labels,
                      std::vector<int> clicks = {}, std::vector<int> views = {}) {
  QueryBlock b;
  b.session_id = "s";
  b.query_id = "q";
  b.shown_idx = shown;
  b.labels = std::move(labels);
  b.click_idx = std::move(clicks);
  b.view_idx = std::move(views);
  b.user_idx = 0;
  for (int idx : shown) b.shown_items.push_back("item" + std::to_string(idx));
  return b;
}

}  // namespace

TEST_CASE("session feature with no history zeroes the behavior segments") {
  const SieConfig cfg = small_config();
  const SieModel model = init_sie(cfg, 10, 3);
  const QueryBlock block = make_block({1, 2}, {0, 0});
  const std::vector<double> f = build_session_feature(model, block, 1);
  REQUIRE(f.size() == cfg.input_dim());
  for (std::size_t i = 0; i < 2 * cfg.embedding_dim; ++i) CHECK(f[i] == 0.0);
  // user and item segments carry the embedding rows
  const auto user = model.user_embeddings.vectors.row(0);
  const auto item = model.item_embeddings.vectors.row(1);
  for (std::size_t d = 0; d < cfg.embedding_dim; ++d) {
    CHECK(f[2 * cfg.embedding_dim + d] == user[d]);
    CHECK(f[3 * cfg.embedding_dim + d] == item[d]);
  }
}

TEST_CASE("a single click makes the click segment equal that item's embedding") {
  const SieModel model = init_sie(small_config(), 10, 3);
  const QueryBlock block = make_block({1}, {0}, {4});
  const std::vector<double> f = build_session_feature(model, block, 1);
  const auto row = model.item_embeddings.vectors.row(4);
  for (std::size_t d = 0; d < model.cfg.embedding_dim; ++d) CHECK(f[d] == row[d]);
}

TEST_CASE("two clicks under average pooling give the elementwise mean") {
  const SieModel model = init_sie(small_config(), 10, 3);
  const QueryBlock block = make_block({1}, {0}, {4, 7});
  const std::vector<double> f = build_session_feature(model, block, 1);
  const auto a = model.item_embeddings.vectors.row(4);
  const auto b = model.item_embeddings.vectors.row(7);
  for (std::size_t d = 0; d < model.cfg.embedding_dim; ++d) {
    CHECK(f[d] == doctest::Approx(0.5 * (a[d] + b[d])));
  }
}

TEST_CASE("session feature is invariant to the order of preceding clicks") {
  const SieModel model = init_sie(small_config(), 12, 3);
  QueryBlock block = make_block({1}, {0}, {2, 5, 9, 3}, {6, 8});
  const std::vector<double> f1 = build_session_feature(model, block, 1);
  std::reverse(block.click_idx.begin(), block.click_idx.end());
  std::reverse(block.view_idx.begin(), block.view_idx.end());
  const std::vector<double> f2 = build_session_feature(model, block, 1);
  REQUIRE(f1.size() == f2.size());
  // averaging order may differ in the last ulp
  for (std::size_t i = 0; i < f1.size(); ++i) {
    CHECK(std::abs(f1[i] - f2[i]) <= 1e-12);
  }
}

TEST_CASE("feature mask zeroes the requested segments") {
  SieConfig cfg = small_config();
  cfg.mask = {false, true};
  const SieModel model = init_sie(cfg, 10, 3);
  const QueryBlock block = make_block({1}, {0}, {4, 7}, {2});
  const std::vector<double> f = build_session_feature(model, block, 1);
  for (std::size_t d = 0; d < cfg.embedding_dim; ++d) CHECK(f[d] == 0.0);
  bool view_segment_nonzero = false;
  for (std::size_t d = cfg.embedding_dim; d < 2 * cfg.embedding_dim; ++d) {
    view_segment_nonzero = view_segment_nonzero || f[d] != 0.0;
  }
  CHECK(view_segment_nonzero);
}

TEST_CASE("sampling hits the 1:5 ratio when enough negatives exist") {
  // one click, ten unclicked
  std::vector<QueryBlock> blocks{make_block({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
                                            {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0})};
  SieConfig cfg = small_config();
  Rng rng(3);
  const std::vector<SieSample> samples = make_training_samples(blocks, cfg, rng);
  std::size_t pos = 0, neg = 0;
  for (const auto& s : samples) (s.positive ? pos : neg)++;
  CHECK(pos == 1);
  CHECK(neg == 5);
  // negatives are distinct unclicked items
  std::vector<int> negatives;
  for (const auto& s : samples) {
    if (!s.positive) negatives.push_back(s.target_item);
  }
  std::sort(negatives.begin(), negatives.end());
  CHECK(std::adjacent_find(negatives.begin(), negatives.end()) == negatives.end());
}

TEST_CASE("a purchased item yields exactly three positive copies") {
  std::vector<QueryBlock> blocks{make_block({0, 1}, {2, 0})};
  SieConfig cfg = small_config();
  Rng rng(3);
  const std::vector<SieSample> samples = make_training_samples(blocks, cfg, rng);
  std::size_t copies = 0;
  for (const auto& s : samples) {
    if (s.positive) {
      CHECK(s.target_item == 0);
      ++copies;
    }
  }
  CHECK(copies == 3);
}

TEST_CASE("negative sampling caps at availability") {
  // one positive, three unclicked, ratio 5 -> only 3 negatives
  std::vector<QueryBlock> blocks{make_block({0, 1, 2, 3}, {1, 0, 0, 0})};
  SieConfig cfg = small_config();
  Rng rng(3);
  const std::vector<SieSample> samples = make_training_samples(blocks, cfg, rng);
  std::size_t neg = 0;
  for (const auto& s : samples) {
    if (!s.positive) ++neg;
  }
  CHECK(neg == 3);
}

TEST_CASE("sampling is deterministic under the seed") {
  SyntheticConfig syn;
  syn.n_users = 6;
  syn.sessions_per_user = 2;
  const Dataset ds = prepare_dataset(sessionize(generate_synthetic(syn, 4)));
  SieConfig cfg = small_config();
  Rng r1(55), r2(55);
  const auto a = make_training_samples(ds.train, cfg, r1);
  const auto b = make_training_samples(ds.train, cfg, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].target_item == b[i].target_item);
    CHECK(a[i].positive == b[i].positive);
  }
}

TEST_CASE("all-zero weights give a (0.5, 0.5) prediction") {
  SieModel model = init_sie(small_config(), 10, 3);
  for (ParamRef ref : model.params()) ref.value->fill(0.0);
  const QueryBlock block = make_block({1, 2}, {0, 0}, {3});
  const std::vector<double> probs = sie_forward(model, block, 1);
  CHECK(probs[0] == doctest::Approx(0.5));
  CHECK(probs[1] == doctest::Approx(0.5));
}

TEST_CASE("forward probabilities sum to one and the representation is nonnegative") {
  const SieModel model = init_sie(small_config(), 20, 4);
  Rng rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<int> clicks, views;
    for (std::size_t i = rng.below(4); i-- > 0;) clicks.push_back(rng.below(20));
    for (std::size_t i = rng.below(4); i-- > 0;) views.push_back(rng.below(20));
    const QueryBlock block = make_block({int(rng.below(20))}, {0}, clicks, views);
    SieForward fwd;
    const std::vector<double> probs = sie_forward(model, block, block.shown_idx[0], &fwd);
    CHECK(std::abs(probs[0] + probs[1] - 1.0) <= 1e-9);
    CHECK(fwd.representation().size() == model.cfg.repr_dim());
    for (double v : fwd.representation()) CHECK(v >= 0.0);
  }
}

TEST_CASE("analytic S-IE gradients match finite differences") {
  SyntheticConfig syn;
  syn.n_users = 4;
  syn.n_items = 25;
  syn.sessions_per_user = 2;
  syn.list_length = 6;

  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Dataset ds = prepare_dataset(sessionize(generate_synthetic(syn, seed)));
    SieConfig cfg = small_config();
    cfg.seed = seed;
    cfg.use_user_embedding = true;
    SieModel model = init_sie(cfg, ds.item_vocab.size(), ds.user_vocab.size());

    Rng rng(seed + 100);
    const QueryBlock& block = ds.train[rng.below(ds.train.size())];
    const SieSample sample{&block, block.shown_idx[rng.below(block.shown_idx.size())],
                           rng.bernoulli(0.5)};

    SieGradients grads;
    sie_loss_and_gradients(model, sample, grads);
    const Gradients dense = sie_dense_gradients(model, grads);
    const GradCheckResult r = finite_difference_check(model.params(), dense, [&]() {
      const std::vector<double> probs = sie_forward(model, block, sample.target_item);
      const std::vector<double> t =
          sample.positive ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
      return cross_entropy(t, probs);
    });
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradients check under max pooling too") {
  SieConfig cfg = small_config();
  cfg.pooling = Pooling::max;
  SieModel model = init_sie(cfg, 15, 3);
  const QueryBlock block = make_block({2, 3}, {1, 0}, {5, 9, 11}, {1, 5});
  const SieSample sample{&block, 2, true};
  SieGradients grads;
  sie_loss_and_gradients(model, sample, grads);
  const Gradients dense = sie_dense_gradients(model, grads);
  const GradCheckResult r = finite_difference_check(model.params(), dense, [&]() {
    const std::vector<double> probs = sie_forward(model, block, sample.target_item);
    return cross_entropy(std::vector<double>{0.0, 1.0}, probs);
  });
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("zero epochs return the initialized model unchanged") {
  SyntheticConfig syn;
  syn.n_users = 4;
  syn.sessions_per_user = 2;
  const Dataset ds = prepare_dataset(sessionize(generate_synthetic(syn, 8)));
  SieConfig cfg = small_config();
  cfg.epochs = 0;
  const SieTrainResult result = train_sie(ds, cfg);
  const SieModel fresh = init_sie(cfg, ds.item_vocab.size(), ds.user_vocab.size());
  CHECK(result.model.item_embeddings.vectors.data == fresh.item_embeddings.vectors.data);
  CHECK(result.model.head.weights.data == fresh.head.weights.data);
  CHECK(result.log.empty());
}

TEST_CASE("training separates the separable synthetic corpus") {
  SyntheticConfig syn;
  syn.n_users = 40;
  syn.n_items = 80;
  syn.n_categories = 8;
  syn.sessions_per_user = 3;
  syn.queries_per_session = 6;
  syn.list_length = 30;
  syn.intent_fraction = 0.12;
  syn.intent_click_prob = 0.9;
  syn.noise_click_prob = 0.05;
  const Dataset ds = prepare_dataset(sessionize(generate_synthetic(syn, 21)));

  SieConfig cfg;
  cfg.embedding_dim = 12;
  cfg.mlp_widths = {48, 24, 12};
  cfg.epochs = 15;
  cfg.eta = 0.01;
  cfg.seed = 21;
  const SieTrainResult result = train_sie(ds, cfg);

  CHECK(result.log.back().accuracy > 0.85);
  CHECK(result.log.back().mean_loss < result.log.front().mean_loss);

  // intent items should rank above noise in most test blocks
  std::size_t ordered = 0, total = 0;
  for (const QueryBlock& block : ds.test) {
    const Ranking r = sie_rank(block, result.model);
    double intent_rank = 0.0, noise_rank = 0.0;
    std::size_t n_intent = 0, n_noise = 0;
    // recover the session's intent category from its labeled items
    std::size_t intent_cat = 0;
    std::size_t best = 0;
    std::vector<std::size_t> votes(syn.n_categories, 0);
    for (std::size_t i = 0; i < block.shown_items.size(); ++i) {
      if (block.labels[i] >= 1) {
        ++votes[synthetic_item_category(block.shown_items[i], syn.n_categories)];
      }
    }
    for (std::size_t c = 0; c < votes.size(); ++c) {
      if (votes[c] > best) {
        best = votes[c];
        intent_cat = c;
      }
    }
    if (best == 0) continue;
    for (std::size_t pos = 0; pos < r.order.size(); ++pos) {
      const auto& item = block.shown_items[r.order[pos]];
      if (synthetic_item_category(item, syn.n_categories) == intent_cat) {
        intent_rank += static_cast<double>(pos);
        ++n_intent;
      } else {
        noise_rank += static_cast<double>(pos);
        ++n_noise;
      }
    }
    if (n_intent == 0 || n_noise == 0) continue;
    ++total;
    if (intent_rank / n_intent < noise_rank / n_noise) ++ordered;
  }
  REQUIRE(total > 50);
  CHECK(static_cast<double>(ordered) / static_cast<double>(total) >= 0.9);
}

TEST_CASE("ranking a single-item block returns it") {
  const SieModel model = init_sie(small_config(), 10, 3);
  const Ranking r = sie_rank(make_block({4}, {0}), model);
  REQUIRE(r.order.size() == 1);
  CHECK(r.order[0] == 0);
}

TEST_CASE("an all-tie model preserves presentation order") {
  SieModel model = init_sie(small_config(), 10, 3);
  for (ParamRef ref : model.params()) ref.value->fill(0.0);
  const Ranking r = sie_rank(make_block({3, 1, 4, 1}, {0, 0, 0, 0}), model);
  CHECK(r.order == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("representation extraction is deterministic, 0-history works, dim is fixed") {
  SieConfig cfg = small_config();
  SieModel model = init_sie(cfg, 10, 3);

  QueryBlock empty_history = make_block({1, 2}, {0, 0});
  // zero the user row so the whole input vector is zero
  for (std::size_t d = 0; d < cfg.embedding_dim; ++d) {
    model.user_embeddings.vectors(0, d) = 0.0;
  }
  const std::vector<double> rep = extract_representation(empty_history, model);
  REQUIRE(rep.size() == cfg.repr_dim());

  // equals the relu MLP applied to the zero vector
  std::vector<double> x(cfg.input_dim(), 0.0);
  for (const DenseLayer& layer : model.mlp) x = dense_forward(layer, x);
  CHECK(rep == x);

  // identical histories give identical representations
  const QueryBlock b1 = make_block({1}, {0}, {2, 3}, {4});
  const QueryBlock b2 = make_block({5, 6}, {0, 0}, {2, 3}, {4});
  CHECK(extract_representation(b1, model) == extract_representation(b2, model));

  const auto all = extract_representations(std::vector<QueryBlock>{b1, b2}, model);
  CHECK(all.size() == 2);
  CHECK(all[0] == all[1]);
}

TEST_CASE("training is deterministic under the seed") {
  SyntheticConfig syn;
  syn.n_users = 5;
  syn.sessions_per_user = 2;
  const Dataset ds = prepare_dataset(sessionize(generate_synthetic(syn, 3)));
  SieConfig cfg = small_config();
  cfg.epochs = 2;
  const SieTrainResult a = train_sie(ds, cfg);
  const SieTrainResult b = train_sie(ds, cfg);
  CHECK(a.model.item_embeddings.vectors.data == b.model.item_embeddings.vectors.data);
  CHECK(a.model.mlp[0].weights.data == b.model.mlp[0].weights.data);
  CHECK(a.log.back().mean_loss == b.log.back().mean_loss);
}
