#pragma once

// Dense feature extractor followed by a per-class proxy layer, trained with
// hand-written backpropagation.
//
//   features = tanh(W_L ... tanh(W_1 x + b_1) ... + b_L)
//   logits_c = <proxy_c, features> + proxy_bias_c
//
// tanh is applied after every feature layer, including the last one.

#include "fedlsm/matrix.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fedlsm {

struct DenseLayer {
  Matrix weight; // out x in
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelParams {
  std::vector<DenseLayer> layers;
  Matrix proxies; // M x feature_dim
  std::vector<double> proxy_bias;

  std::size_t num_classes() const { return proxies.rows; }
  std::size_t input_dim() const { return layers.front().weight.cols; }
  std::size_t feature_dim() const { return layers.back().weight.rows; }
  // [input, hidden_1, ..., feature]
  std::vector<std::size_t> layer_dims() const;
  std::size_t parameter_count() const;

  // A zero-valued copy with the same shapes.
  ModelParams zeros_like() const;
  bool same_shape(const ModelParams& other) const;
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Gradients share the parameter layout.
using Gradients = ModelParams;

// Visits every parameter tensor in declaration order: for each layer its weight
// then its bias, then the proxy matrix, then the proxy biases. The index passed
// to the visitor is the layer index (layers.size() for the proxy layer).
void for_each_tensor(ModelParams& p, const std::function<void(std::size_t, std::span<double>)>& fn);
void for_each_tensor(const ModelParams& p,
                     const std::function<void(std::size_t, std::span<const double>)>& fn);

// Checks layer chaining, proxy width and M >= 2.
void validate(const ModelParams& p);

// layer_dims = [input, hidden..., feature]; needs at least two entries.
// Weights are uniform in +-sqrt(6 / (fan_in + fan_out)); biases are zero.
ModelParams init_params(std::span<const std::size_t> layer_dims, std::size_t num_classes,
                        std::uint64_t seed);

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> activations; // post-tanh output of each feature layer
  Matrix logits;

  const Matrix& features() const { return activations.back(); }
};

ForwardCache forward(const ModelParams& params, const Matrix& batch);

// Gradients of sum_ij dlogits(i,j) * logits(i,j) with respect to every parameter.
Gradients backward(const ModelParams& params, const ForwardCache& cache, const Matrix& dlogits);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::uint64_t step = 0;
  AdamConfig config;

  static AdamState fresh(const ModelParams& shape, AdamConfig cfg = {});
};

// One bias-corrected Adam update, applied in place to params and state.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr);

// teacher = decay * teacher + (1 - decay) * student, in place.
void ema_update(ModelParams& teacher, const ModelParams& student, double decay);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> sigmoid(std::span<const double> logits);
double sigmoid(double x);

// Row-wise versions for a logits matrix.
Matrix softmax_rows(const Matrix& logits);
Matrix sigmoid_rows(const Matrix& logits);

// Per-logit loss for gradient checking: returns the loss and writes dL/dlogits.
using LogitLoss = std::function<double(const Matrix& logits, Matrix& dlogits)>;

// Max relative error between backward() and central differences over every
// parameter: |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double gradcheck(const ModelParams& params, const Matrix& batch, const LogitLoss& loss,
                 double eps = 1e-5);

} // namespace fedlsm
