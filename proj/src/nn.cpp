#include "sessionrank/nn.hpp"

#include <algorithm>
#include <cmath>

namespace sessionrank {

double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::identity:
      return x;
  }
  return x;
}

double activation_derivative(Activation act, double pre, double post) {
  switch (act) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return post * (1.0 - post);
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

void DenseGrad::match(const DenseLayer& layer) {
  if (!weights.same_shape(layer.weights)) {
    weights = Matrix(layer.weights.rows, layer.weights.cols);
  }
  if (!bias.same_shape(layer.bias)) {
    bias = Matrix(layer.bias.rows, layer.bias.cols);
  }
}

void DenseGrad::zero() {
  weights.fill(0.0);
  bias.fill(0.0);
}

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x,
                                  DenseCache* cache) {
  require(x.size() == layer.in_dim(), "dense_forward: input dim " +
                                          std::to_string(x.size()) + " != layer in dim " +
                                          std::to_string(layer.in_dim()));
  const std::size_t out = layer.out_dim();
  const std::size_t in = layer.in_dim();
  std::vector<double> pre(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double* w = layer.weights.data.data() + o * in;
    double acc = layer.bias.data[o];
    for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
    pre[o] = acc;
  }
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) y[o] = apply_activation(layer.activation, pre[o]);
  if (cache) {
    cache->input.assign(x.begin(), x.end());
    cache->pre = pre;
    cache->output = y;
  }
  return y;
}

std::vector<double> dense_backward(const DenseLayer& layer, const DenseCache& cache,
                                   std::span<const double> grad_out, DenseGrad& grad) {
  const std::size_t out = layer.out_dim();
  const std::size_t in = layer.in_dim();
  require(grad_out.size() == out, "dense_backward: grad dim mismatch");
  require(cache.input.size() == in, "dense_backward: stale cache");

  std::vector<double> dpre(out);
  for (std::size_t o = 0; o < out; ++o) {
    dpre[o] =
        grad_out[o] * activation_derivative(layer.activation, cache.pre[o], cache.output[o]);
  }
  std::vector<double> dx(in, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double d = dpre[o];
    if (d == 0.0) continue;
    const double* w = layer.weights.data.data() + o * in;
    double* gw = grad.weights.data.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      dx[i] += w[i] * d;
      gw[i] += d * cache.input[i];
    }
    grad.bias.data[o] += d;
  }
  return dx;
}

void sgd_step(DenseLayer& layer, const DenseGrad& grad, double eta) {
  sgd_step(layer.weights, grad.weights, eta);
  sgd_step(layer.bias, grad.bias, eta);
}

void sgd_step(Matrix& params, const Matrix& grad, double eta) {
  require(params.same_shape(grad), "sgd_step: shape mismatch");
  for (std::size_t i = 0; i < params.data.size(); ++i) params.data[i] -= eta * grad.data[i];
}

std::vector<double> softmax(std::span<const double> scores) {
  require(!scores.empty(), "softmax: empty input");
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> p(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double cross_entropy(std::span<const double> target, std::span<const double> predicted) {
  require(target.size() == predicted.size(), "cross_entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    loss -= target[i] * std::log(std::max(predicted[i], 1e-12));
  }
  return loss;
}

std::vector<double> pool(const std::vector<std::span<const double>>& vectors, Pooling mode,
                         std::size_t dim) {
  PoolCache cache;
  return pool(vectors, mode, dim, cache);
}

std::vector<double> pool(const std::vector<std::span<const double>>& vectors, Pooling mode,
                         std::size_t dim, PoolCache& cache) {
  cache.mode = mode;
  cache.count = vectors.size();
  cache.argmax.clear();
  std::vector<double> out(dim, 0.0);
  if (vectors.empty()) return out;
  for (const auto& v : vectors) {
    require(v.size() == dim, "pool: mixed dimensions");
  }
  if (mode == Pooling::average) {
    for (const auto& v : vectors) {
      for (std::size_t d = 0; d < dim; ++d) out[d] += v[d];
    }
    const double inv = 1.0 / static_cast<double>(vectors.size());
    for (double& x : out) x *= inv;
  } else {
    cache.argmax.assign(dim, 0);
    for (std::size_t d = 0; d < dim; ++d) out[d] = vectors[0][d];
    for (std::size_t r = 1; r < vectors.size(); ++r) {
      for (std::size_t d = 0; d < dim; ++d) {
        if (vectors[r][d] > out[d]) {
          out[d] = vectors[r][d];
          cache.argmax[d] = r;
        }
      }
    }
  }
  return out;
}

void pool_backward(std::span<const double> grad_pooled, const PoolCache& cache,
                   const std::vector<std::span<double>>& row_grads) {
  require(row_grads.size() == cache.count, "pool_backward: row count mismatch");
  if (cache.count == 0) return;
  if (cache.mode == Pooling::average) {
    const double inv = 1.0 / static_cast<double>(cache.count);
    for (auto& g : row_grads) {
      for (std::size_t d = 0; d < g.size(); ++d) g[d] += grad_pooled[d] * inv;
    }
  } else {
    for (std::size_t d = 0; d < grad_pooled.size(); ++d) {
      row_grads[cache.argmax[d]][d] += grad_pooled[d];
    }
  }
}

Matrix init_params(std::size_t rows, std::size_t cols, InitScheme scheme, Rng& rng) {
  Matrix m(rows, cols);
  if (scheme == InitScheme::zeros) return m;
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& x : m.data) x = rng.uniform(-bound, bound);
  return m;
}

void init_layer(DenseLayer& layer, InitScheme scheme, Rng& rng) {
  layer.weights = init_params(layer.weights.rows, layer.weights.cols, scheme, rng);
  layer.bias.fill(0.0);
}

void Gradients::match(const std::vector<ParamRef>& params) {
  for (const auto& p : params) {
    Matrix& g = by_name[p.name];
    if (!g.same_shape(*p.value)) g = Matrix(p.value->rows, p.value->cols);
  }
}

void Gradients::zero() {
  for (auto& [name, g] : by_name) g.fill(0.0);
}

GradCheckResult finite_difference_check(const std::vector<ParamRef>& params,
                                        const Gradients& analytic,
                                        const std::function<double()>& loss_fn,
                                        double epsilon) {
  GradCheckResult result;
  for (const auto& p : params) {
    const Matrix& a = analytic.at(p.name);
    require(a.same_shape(*p.value), "finite_difference_check: gradient shape mismatch");
    for (std::size_t i = 0; i < p.value->data.size(); ++i) {
      double& w = p.value->data[i];
      const double saved = w;
      w = saved + epsilon;
      const double lp = loss_fn();
      w = saved - epsilon;
      const double lm = loss_fn();
      w = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw NumericalError("finite_difference_check: non-finite loss at " + p.name);
      }
      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double analytic_g = a.data[i];
      const double rel = std::abs(analytic_g - numeric) /
                         std::max(1e-8, std::abs(analytic_g) + std::abs(numeric));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace sessionrank
