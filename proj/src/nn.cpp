#include "fedlsm/nn.hpp"

#include "fedlsm/errors.hpp"
#include "fedlsm/kernels.hpp"
#include "fedlsm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedlsm {

std::vector<std::size_t> ModelParams::layer_dims() const {
  std::vector<std::size_t> dims;
  dims.reserve(layers.size() + 1);
  dims.push_back(layers.front().weight.cols);
  for (const auto& l : layers)
    dims.push_back(l.weight.rows);
  return dims;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](std::size_t, std::span<const double> t) { n += t.size(); });
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for_each_tensor(z, [](std::size_t, std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
  return z;
}

bool ModelParams::same_shape(const ModelParams& o) const {
  if (layers.size() != o.layers.size())
    return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows != o.layers[i].weight.rows ||
        layers[i].weight.cols != o.layers[i].weight.cols ||
        layers[i].bias.size() != o.layers[i].bias.size())
      return false;
  }
  return proxies.rows == o.proxies.rows && proxies.cols == o.proxies.cols &&
         proxy_bias.size() == o.proxy_bias.size();
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](std::size_t, std::span<const double> t) {
    ok = ok && std::all_of(t.begin(), t.end(), [](double v) { return std::isfinite(v); });
  });
  return ok;
}

void for_each_tensor(ModelParams& p, const std::function<void(std::size_t, std::span<double>)>& fn) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    fn(i, p.layers[i].weight.data);
    fn(i, p.layers[i].bias);
  }
  fn(p.layers.size(), p.proxies.data);
  fn(p.layers.size(), p.proxy_bias);
}

void for_each_tensor(const ModelParams& p,
                     const std::function<void(std::size_t, std::span<const double>)>& fn) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    fn(i, p.layers[i].weight.data);
    fn(i, p.layers[i].bias);
  }
  fn(p.layers.size(), p.proxies.data);
  fn(p.layers.size(), p.proxy_bias);
}

void validate(const ModelParams& p) {
  if (p.layers.empty())
    throw ShapeError("model has no feature layers");
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    if (l.weight.data.size() != l.weight.rows * l.weight.cols || l.bias.size() != l.weight.rows)
      throw ShapeError("layer " + std::to_string(i) + " is malformed");
    if (i > 0 && l.weight.cols != p.layers[i - 1].weight.rows)
      throw ShapeError("layer " + std::to_string(i) + " input does not chain");
  }
  if (p.proxies.rows < 2)
    throw ShapeError("need at least two classes");
  if (p.proxies.cols != p.feature_dim() || p.proxy_bias.size() != p.proxies.rows)
    throw ShapeError("proxy layer does not match feature dimension");
}

ModelParams init_params(std::span<const std::size_t> layer_dims, std::size_t num_classes,
                        std::uint64_t seed) {
  if (layer_dims.size() < 2)
    throw ConfigError("layer_dims needs an input size and at least one feature layer");
  if (num_classes < 2)
    throw ConfigError("num_classes must be at least 2");
  if (std::find(layer_dims.begin(), layer_dims.end(), 0u) != layer_dims.end())
    throw ConfigError("layer_dims entries must be positive");

  Rng rng(seed);
  auto fill = [&](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (double& v : w.data)
      v = rng.uniform(-limit, limit);
  };

  ModelParams p;
  for (std::size_t i = 1; i < layer_dims.size(); ++i) {
    DenseLayer l{Matrix(layer_dims[i], layer_dims[i - 1]), std::vector<double>(layer_dims[i], 0.0)};
    fill(l.weight);
    p.layers.push_back(std::move(l));
  }
  p.proxies = Matrix(num_classes, layer_dims.back());
  fill(p.proxies);
  p.proxy_bias.assign(num_classes, 0.0);
  return p;
}

ForwardCache forward(const ModelParams& params, const Matrix& batch) {
  if (batch.cols != params.input_dim())
    throw ShapeError("forward: batch has " + std::to_string(batch.cols) + " columns, model expects " +
                     std::to_string(params.input_dim()));
  ForwardCache cache;
  cache.input = batch;
  cache.activations.reserve(params.layers.size());
  const Matrix* prev = &cache.input;
  for (const auto& layer : params.layers) {
    Matrix z = matmul_nt(*prev, layer.weight, layer.bias);
    for (double& v : z.data)
      v = std::tanh(v);
    cache.activations.push_back(std::move(z));
    prev = &cache.activations.back();
  }
  cache.logits = matmul_nt(*prev, params.proxies, params.proxy_bias);
  return cache;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, const Matrix& dlogits) {
  if (dlogits.rows != cache.logits.rows || dlogits.cols != cache.logits.cols)
    throw ShapeError("backward: dlogits shape does not match logits");
  const auto& k = kernels::active();
  Gradients g = params.zeros_like();
  const std::size_t n = dlogits.rows;

  accumulate_tn(g.proxies, dlogits, cache.features());
  for (std::size_t i = 0; i < n; ++i)
    k.axpy(g.proxy_bias.data(), 1.0, dlogits.data.data() + i * dlogits.cols, dlogits.cols);

  Matrix dact = matmul_nn(dlogits, params.proxies);
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const Matrix& act = cache.activations[li];
    Matrix dz = std::move(dact);
    for (std::size_t j = 0; j < dz.data.size(); ++j) {
      const double a = act.data[j];
      dz.data[j] *= 1.0 - a * a;
    }
    const Matrix& below = li == 0 ? cache.input : cache.activations[li - 1];
    accumulate_tn(g.layers[li].weight, dz, below);
    for (std::size_t i = 0; i < n; ++i)
      k.axpy(g.layers[li].bias.data(), 1.0, dz.data.data() + i * dz.cols, dz.cols);
    if (li > 0)
      dact = matmul_nn(dz, params.layers[li].weight);
  }
  return g;
}

AdamState AdamState::fresh(const ModelParams& shape, AdamConfig cfg) {
  return AdamState{shape.zeros_like(), shape.zeros_like(), 0, cfg};
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr) {
  if (!(lr > 0.0))
    throw ConfigError("adam_step: learning rate must be positive");
  if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
    throw ShapeError("adam_step: gradient or state shape mismatch");

  for_each_tensor(grads, [](std::size_t layer, std::span<const double> t) {
    for (double v : t)
      if (!std::isfinite(v))
        throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(layer));
  });

  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  std::vector<std::span<double>> p_t, m_t, v_t;
  std::vector<std::span<const double>> g_t;
  for_each_tensor(params, [&](std::size_t, std::span<double> s) { p_t.push_back(s); });
  for_each_tensor(state.m, [&](std::size_t, std::span<double> s) { m_t.push_back(s); });
  for_each_tensor(state.v, [&](std::size_t, std::span<double> s) { v_t.push_back(s); });
  for_each_tensor(grads, [&](std::size_t, std::span<const double> s) { g_t.push_back(s); });

  const auto& k = kernels::active();
  for (std::size_t i = 0; i < p_t.size(); ++i)
    k.adam(p_t[i].data(), m_t[i].data(), v_t[i].data(), g_t[i].data(), p_t[i].size(), lr, cfg.beta1,
           cfg.beta2, cfg.eps, bc1, bc2);
}

void ema_update(ModelParams& teacher, const ModelParams& student, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0))
    throw ConfigError("ema_update: decay must lie in [0, 1]");
  if (!teacher.same_shape(student))
    throw ShapeError("ema_update: teacher and student shapes differ");
  std::vector<std::span<const double>> src;
  for_each_tensor(student, [&](std::size_t, std::span<const double> s) { src.push_back(s); });
  std::size_t i = 0;
  const auto& k = kernels::active();
  for_each_tensor(teacher, [&](std::size_t, std::span<double> t) {
    k.ema(t.data(), src[i++].data(), decay, t.size());
  });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty())
    return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out)
    v /= total;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> sigmoid(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  std::transform(logits.begin(), logits.end(), out.begin(), [](double x) { return sigmoid(x); });
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto p = softmax(logits.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

Matrix sigmoid_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  std::transform(logits.data.begin(), logits.data.end(), out.data.begin(),
                 [](double x) { return sigmoid(x); });
  return out;
}

double gradcheck(const ModelParams& params, const Matrix& batch, const LogitLoss& loss, double eps) {
  if (!(eps > 1e-7 && eps < 1e-2))
    throw ConfigError("gradcheck: eps must lie in (1e-7, 1e-2)");

  const ForwardCache cache = forward(params, batch);
  Matrix dlogits(cache.logits.rows, cache.logits.cols);
  loss(cache.logits, dlogits);
  const Gradients analytic = backward(params, cache, dlogits);

  auto eval = [&](const ModelParams& p) {
    const ForwardCache c = forward(p, batch);
    Matrix scratch(c.logits.rows, c.logits.cols);
    return loss(c.logits, scratch);
  };

  std::vector<double> flat_analytic;
  for_each_tensor(analytic, [&](std::size_t, std::span<const double> t) {
    flat_analytic.insert(flat_analytic.end(), t.begin(), t.end());
  });

  ModelParams probe = params;
  std::vector<std::span<double>> tensors;
  for_each_tensor(probe, [&](std::size_t, std::span<double> t) { tensors.push_back(t); });

  double worst = 0.0;
  std::size_t flat = 0;
  for (auto t : tensors) {
    for (std::size_t j = 0; j < t.size(); ++j, ++flat) {
      const double orig = t[j];
      t[j] = orig + eps;
      const double up = eval(probe);
      t[j] = orig - eps;
      const double down = eval(probe);
      t[j] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = flat_analytic[flat];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

} // namespace fedlsm
