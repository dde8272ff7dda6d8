#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sessionrank/nn.hpp"
#include "sessionrank/serialize.hpp"

using namespace sessionrank;

namespace {

DenseLayer make_layer(std::size_t out, std::size_t in, Activation act,
                      const std::vector<double>& w, const std::vector<double>& b) {
  DenseLayer layer(out, in, act);
  layer.weights.data = w;
  layer.bias.data = b;
  return layer;
}

}  // namespace

TEST_CASE("dense_forward identity weights pass the input through") {
  DenseLayer layer = make_layer(2, 2, Activation::identity, {1, 0, 0, 1}, {0, 0});
  const std::vector<double> x{1.0, 2.0};
  const std::vector<double> y = dense_forward(layer, x);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(2.0));
}

TEST_CASE("dense_forward zero weights give the zero vector under relu") {
  DenseLayer layer(3, 4, Activation::relu);
  const std::vector<double> x{5.0, -2.0, 7.0, 0.5};
  for (double v : dense_forward(layer, x)) CHECK(v == 0.0);
}

TEST_CASE("dense_forward clips negative pre-activations under relu") {
  // W=[[1,-1]], b=0, x=(2,5): pre-activation 2-5=-3, clipped to 0
  DenseLayer layer = make_layer(1, 2, Activation::relu, {1, -1}, {0});
  const std::vector<double> y = dense_forward(layer, std::vector<double>{2.0, 5.0});
  CHECK(y.size() == 1);
  CHECK(y[0] == 0.0);
}

TEST_CASE("dense_forward rejects dimension mismatch") {
  DenseLayer layer(2, 3, Activation::identity);
  CHECK_THROWS_AS(dense_forward(layer, std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("softmax of equal scores is uniform") {
  const std::vector<double> p = softmax(std::vector<double>{3.5, 3.5, 3.5, 3.5});
  for (double v : p) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("softmax of a single score is 1") {
  const std::vector<double> p = softmax(std::vector<double>{-17.0});
  CHECK(p.size() == 1);
  CHECK(p[0] == doctest::Approx(1.0));
}

TEST_CASE("softmax of (0, ln 2) gives (1/3, 2/3)") {
  const std::vector<double> p = softmax(std::vector<double>{0.0, std::log(2.0)});
  CHECK(p[0] == doctest::Approx(1.0 / 3.0));
  CHECK(p[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("softmax rejects empty input") {
  CHECK_THROWS_AS(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("softmax sums to one and is shift-invariant") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> scores(n), shifted(n);
    const double shift = rng.uniform(-100.0, 100.0);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-20.0, 20.0);
      shifted[i] = scores[i] + shift;
    }
    const std::vector<double> p = softmax(scores);
    const std::vector<double> q = softmax(shifted);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p[i] > 0.0);
      sum += p[i];
      CHECK(std::abs(p[i] - q[i]) <= 1e-12);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("cross_entropy is zero for a perfect one-hot prediction") {
  CHECK(cross_entropy(std::vector<double>{0.0, 1.0, 0.0},
                      std::vector<double>{0.0, 1.0, 0.0}) == doctest::Approx(0.0));
}

TEST_CASE("cross_entropy of a uniform guess against a one-hot target is ln 2") {
  CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("cross_entropy self-entropy of a fair coin is ln 2") {
  CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("cross_entropy rejects length mismatch") {
  CHECK_THROWS_AS(
      cross_entropy(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}),
      std::invalid_argument);
}

TEST_CASE("pool of a single vector returns it in both modes") {
  const std::vector<double> v{1.0, -2.0, 3.0};
  for (Pooling mode : {Pooling::average, Pooling::max}) {
    const std::vector<double> out = pool({std::span<const double>(v)}, mode, 3);
    CHECK(out == v);
  }
}

TEST_CASE("average pool of two one-hot vectors") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{0.0, 1.0};
  const std::vector<double> out =
      pool({std::span<const double>(a), std::span<const double>(b)}, Pooling::average, 2);
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == doctest::Approx(0.5));
}

TEST_CASE("empty pool is the zero vector of the configured dim") {
  for (Pooling mode : {Pooling::average, Pooling::max}) {
    const std::vector<double> out = pool({}, mode, 4);
    CHECK(out == std::vector<double>{0.0, 0.0, 0.0, 0.0});
  }
}

TEST_CASE("pool rejects mixed dimensions") {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0};
  CHECK_THROWS_AS(
      pool({std::span<const double>(a), std::span<const double>(b)}, Pooling::max, 2),
      std::invalid_argument);
}

TEST_CASE("average pool of n copies equals the vector; max pool is idempotent and "
          "permutation-invariant") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 1 + rng.below(6);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.uniform(-5.0, 5.0);

    std::vector<std::span<const double>> copies(1 + rng.below(5),
                                                std::span<const double>(v));
    const std::vector<double> avg = pool(copies, Pooling::average, dim);
    for (std::size_t d = 0; d < dim; ++d) CHECK(avg[d] == doctest::Approx(v[d]));

    std::vector<std::vector<double>> rows(2 + rng.below(4), std::vector<double>(dim));
    for (auto& r : rows) {
      for (double& x : r) x = rng.uniform(-5.0, 5.0);
    }
    std::vector<std::span<const double>> spans(rows.begin(), rows.end());
    const std::vector<double> mx = pool(spans, Pooling::max, dim);
    // idempotent: pooling the result with itself changes nothing
    const std::vector<double> mx2 =
        pool({std::span<const double>(mx), std::span<const double>(mx)}, Pooling::max, dim);
    CHECK(mx2 == mx);
    // permutation-invariant
    std::reverse(spans.begin(), spans.end());
    CHECK(pool(spans, Pooling::max, dim) == mx);
  }
}

TEST_CASE("sgd_step with zero gradients is a fixed point") {
  Matrix params(2, 2, 1.5);
  Matrix grads(2, 2, 0.0);
  Matrix before = params;
  sgd_step(params, grads, 0.1);
  CHECK(params.data == before.data);
}

TEST_CASE("sgd_step applies eta times the gradient") {
  Matrix params(1, 1, 1.0);
  Matrix grads(1, 1, 2.0);
  sgd_step(params, grads, 0.001);
  CHECK(params(0, 0) == doctest::Approx(0.998));
}

TEST_CASE("sgd_step rejects shape mismatch") {
  Matrix params(2, 2);
  Matrix grads(2, 3);
  CHECK_THROWS_AS(sgd_step(params, grads, 0.1), std::invalid_argument);
}

TEST_CASE("sgd strictly decreases a convex quadratic") {
  // f(w) = (w - 3)^2, minimized far from the start
  Matrix w(1, 1, 10.0);
  double prev = (w(0, 0) - 3.0) * (w(0, 0) - 3.0);
  for (int step = 0; step < 20; ++step) {
    Matrix g(1, 1, 2.0 * (w(0, 0) - 3.0));
    sgd_step(w, g, 0.1);
    const double loss = (w(0, 0) - 3.0) * (w(0, 0) - 3.0);
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("init_params zeros scheme") {
  Rng rng(1);
  const Matrix m = init_params(3, 4, InitScheme::zeros, rng);
  for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("init_params is deterministic per seed and varies across seeds") {
  Rng a(99), b(99), c(100);
  const Matrix ma = init_params(4, 5, InitScheme::uniform_scaled, a);
  const Matrix mb = init_params(4, 5, InitScheme::uniform_scaled, b);
  const Matrix mc = init_params(4, 5, InitScheme::uniform_scaled, c);
  CHECK(ma.data == mb.data);
  CHECK(ma.data != mc.data);

  const double bound = std::sqrt(6.0 / (4.0 + 5.0));
  for (double v : ma.data) {
    CHECK(v >= -bound);
    CHECK(v <= bound);
  }
}

TEST_CASE("activation ranges: relu nonnegative, sigmoid in (0,1)") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-50.0, 50.0);
    CHECK(apply_activation(Activation::relu, x) >= 0.0);
    // the open interval is only representable up to |x| ~ 36 in doubles
    const double s = apply_activation(Activation::sigmoid, rng.uniform(-30.0, 30.0));
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("finite_difference_check on a linear model with squared loss") {
  // loss(w) = (w.x - t)^2 has gradient 2 (w.x - t) x, exact up to
  // second-order difference error.
  Matrix w(1, 3);
  w.data = {0.5, -1.0, 2.0};
  const std::vector<double> x{1.0, 2.0, -0.5};
  const double target = 0.7;

  auto loss_fn = [&]() {
    double y = 0.0;
    for (std::size_t i = 0; i < 3; ++i) y += w.data[i] * x[i];
    return (y - target) * (y - target);
  };

  Gradients analytic;
  std::vector<ParamRef> params{{"w", &w}};
  analytic.match(params);
  double y = 0.0;
  for (std::size_t i = 0; i < 3; ++i) y += w.data[i] * x[i];
  for (std::size_t i = 0; i < 3; ++i) analytic.at("w").data[i] = 2.0 * (y - target) * x[i];

  const GradCheckResult r = finite_difference_check(params, analytic, loss_fn);
  CHECK(r.max_rel_error < 1e-7);
}

TEST_CASE("model tables round-trip through the JSON format byte-identically") {
  Rng rng(3);
  Matrix a = init_params(3, 4, InitScheme::uniform_scaled, rng);
  Matrix b = init_params(1, 5, InitScheme::uniform_scaled, rng);
  std::vector<ParamRef> params{{"alpha", &a}, {"beta", &b}};

  const std::string path = "nn_roundtrip_test.json";
  save_tables(path, params);
  const std::string dump1 = tables_to_json(params);

  Matrix a2(3, 4), b2(1, 5);
  std::vector<ParamRef> loaded{{"alpha", &a2}, {"beta", &b2}};
  load_tables(path, loaded);
  CHECK(a2.data == a.data);
  CHECK(b2.data == b.data);
  CHECK(tables_to_json(loaded) == dump1);

  // shape mismatch is rejected
  Matrix bad(4, 3);
  std::vector<ParamRef> wrong{{"alpha", &bad}, {"beta", &b2}};
  CHECK_THROWS(load_tables(path, wrong));
  std::remove(path.c_str());
}
