#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sessionrank/matrix.hpp"
#include "sessionrank/rng.hpp"

namespace sessionrank {

// Thrown when training or checking produces non-finite values.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation { relu, sigmoid, identity };

double apply_activation(Activation act, double x);
double activation_derivative(Activation act, double pre, double post);

// Fully connected layer, weights are (out x in), bias is (1 x out).
struct DenseLayer {
  Matrix weights;
  Matrix bias;
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in, Activation act)
      : weights(out, in), bias(1, out), activation(act) {}

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

// Forward-pass state kept for the backward pass.
struct DenseCache {
  std::vector<double> input;
  std::vector<double> pre;     // Wx + b
  std::vector<double> output;  // activation(pre)
};

// Gradient of one layer's parameters.
struct DenseGrad {
  Matrix weights;
  Matrix bias;

  void match(const DenseLayer& layer);
  void zero();
};

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x,
                                  DenseCache* cache = nullptr);

// Given dL/d(output), writes dL/d(params) into grad (accumulating) and
// returns dL/d(input).
std::vector<double> dense_backward(const DenseLayer& layer, const DenseCache& cache,
                                   std::span<const double> grad_out, DenseGrad& grad);

void sgd_step(DenseLayer& layer, const DenseGrad& grad, double eta);
void sgd_step(Matrix& params, const Matrix& grad, double eta);

// Embedding lookup table. Row `oov_row` (always 0 here) is the shared
// vector for unknown ids; callers map unseen ids to any out-of-range
// index and get that row back.
struct EmbeddingTable {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  Matrix vectors;
  std::size_t oov_row = 0;

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t vocab, std::size_t d)
      : vocab_size(vocab), dim(d), vectors(vocab, d) {}

  std::span<const double> lookup(long id) const {
    std::size_t r = (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
                        ? oov_row
                        : static_cast<std::size_t>(id);
    return vectors.row(r);
  }

  std::size_t resolve(long id) const {
    return (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
               ? oov_row
               : static_cast<std::size_t>(id);
  }
};

// Numerically stable softmax (max-subtraction).
std::vector<double> softmax(std::span<const double> scores);

// -sum t_i log p_i, probabilities clamped at 1e-12 before the log.
double cross_entropy(std::span<const double> target, std::span<const double> predicted);

enum class Pooling { max, average };

// Elementwise max or mean over the rows. An empty list pools to the zero
// vector of length `dim`.
std::vector<double> pool(const std::vector<std::span<const double>>& vectors,
                         Pooling mode, std::size_t dim);

// Bookkeeping for routing pooled gradients back to contributing rows.
struct PoolCache {
  Pooling mode = Pooling::average;
  std::size_t count = 0;
  std::vector<std::size_t> argmax;  // per-dim winner, max pooling only
};

std::vector<double> pool(const std::vector<std::span<const double>>& vectors,
                         Pooling mode, std::size_t dim, PoolCache& cache);

// Distributes d(pooled)/d(row) to each contributing row gradient.
void pool_backward(std::span<const double> grad_pooled, const PoolCache& cache,
                   const std::vector<std::span<double>>& row_grads);

enum class InitScheme { uniform_scaled, zeros };

// uniform_scaled draws from U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
Matrix init_params(std::size_t rows, std::size_t cols, InitScheme scheme, Rng& rng);
void init_layer(DenseLayer& layer, InitScheme scheme, Rng& rng);

// Named view of a model's parameter tables, the unit the gradient checker
// and the serializer iterate over.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
};

// Dense per-parameter gradients mirroring a model's tables.
struct Gradients {
  std::map<std::string, Matrix> by_name;

  Matrix& at(const std::string& name) { return by_name.at(name); }
  const Matrix& at(const std::string& name) const { return by_name.at(name); }
  void match(const std::vector<ParamRef>& params);
  void zero();
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central finite differences against analytic gradients over every entry
// of every parameter. Relative error is |a-n| / max(1e-8, |a|+|n|).
GradCheckResult finite_difference_check(const std::vector<ParamRef>& params,
                                        const Gradients& analytic,
                                        const std::function<double()>& loss_fn,
                                        double epsilon = 1e-5);

}  // namespace sessionrank
