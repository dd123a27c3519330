// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "distillab/common.hpp"
#include "distillab/rng.hpp"

namespace distillab {

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(s) + "' (expected relu|tanh)");
}

/// Dense feed-forward network in double precision. Hidden layers share one
/// activation; the output layer is linear and produces logits.
struct MlpModel {
  std::vector<int> layer_sizes;             // input dim first, output dim last
  std::vector<std::vector<double>> weights; // weights[l]: (layer_sizes[l+1] x layer_sizes[l]), row-major
  std::vector<std::vector<double>> biases;  // biases[l]: layer_sizes[l+1]
  Activation activation = Activation::relu;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
};

/// Gradients (or any accumulator) shaped exactly like a model's parameters.
struct ParamGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

inline int64_t param_count(const std::vector<int>& layer_sizes) {
  int64_t n = 0;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += static_cast<int64_t>(layer_sizes[l] + 1) * layer_sizes[l + 1];
  return n;
}

inline int64_t param_count(const MlpModel& m) { return param_count(m.layer_sizes); }

inline ParamGrads zeros_like(const MlpModel& m) {
  ParamGrads g;
  g.weights.reserve(m.weights.size());
  g.biases.reserve(m.biases.size());
  for (size_t l = 0; l < m.weights.size(); ++l) {
    g.weights.emplace_back(m.weights[l].size(), 0.0);
    g.biases.emplace_back(m.biases[l].size(), 0.0);
  }
  return g;
}

/// Glorot-uniform weights, zero biases, fully seeded.
inline MlpModel init_model(const std::vector<int>& layer_sizes, Activation act, uint64_t seed) {
  if (layer_sizes.size() < 2) throw ShapeError("model needs at least input and output layers");
  for (int s : layer_sizes)
    if (s <= 0) throw ShapeError("layer sizes must be positive");

  MlpModel m;
  m.layer_sizes = layer_sizes;
  m.activation = act;
  Rng rng = Rng::stream(seed, "mlp_init");
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
    for (double& v : w) v = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

namespace detail {

inline void check_input(const MlpModel& m, std::span<const double> input) {
  if (static_cast<int>(input.size()) != m.input_dim())
    throw ShapeError("forward: input length " + std::to_string(input.size()) +
                     " does not match model input dim " + std::to_string(m.input_dim()));
}

inline double act_value(Activation a, double x) {
  return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the activation output.
inline double act_deriv_from_value(Activation a, double y) {
  return a == Activation::relu ? (y > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

}  // namespace detail

/// Forward pass that keeps every layer's post-activation output, for backprop.
/// cache[0] is the input copy; cache.back() holds the logits.
inline std::vector<std::vector<double>> forward_cached(const MlpModel& m,
                                                       std::span<const double> input) {
  detail::check_input(m, input);
  std::vector<std::vector<double>> cache;
  cache.reserve(m.num_layers() + 1);
  cache.emplace_back(input.begin(), input.end());
  for (int l = 0; l < m.num_layers(); ++l) {
    const auto& x = cache.back();
    const int out = m.layer_sizes[l + 1];
    const int in = m.layer_sizes[l];
    std::vector<double> y(out);
    const bool hidden = l + 1 < m.num_layers();
    for (int i = 0; i < out; ++i) {
      double acc = m.biases[l][i];
      const double* row = m.weights[l].data() + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * x[j];
      y[i] = hidden ? detail::act_value(m.activation, acc) : acc;
    }
    cache.push_back(std::move(y));
  }
  return cache;
}

inline std::vector<double> forward(const MlpModel& m, std::span<const double> input) {
  return forward_cached(m, input).back();
}

/// Exact gradient of (loss o forward) given dLoss/dLogits, accumulated into
/// `grads` (scaled by `scale`). Returns nothing; callers combine samples.
inline void backward_accumulate(const MlpModel& m,
                                const std::vector<std::vector<double>>& cache,
                                std::span<const double> loss_grad_wrt_logits,
                                ParamGrads& grads, double scale = 1.0) {
  if (static_cast<int>(loss_grad_wrt_logits.size()) != m.output_dim())
    throw ShapeError("backward: loss gradient length " +
                     std::to_string(loss_grad_wrt_logits.size()) +
                     " does not match output dim " + std::to_string(m.output_dim()));

  std::vector<double> delta(loss_grad_wrt_logits.begin(), loss_grad_wrt_logits.end());
  for (int l = m.num_layers() - 1; l >= 0; --l) {
    const auto& x = cache[l];
    const int out = m.layer_sizes[l + 1];
    const int in = m.layer_sizes[l];
    for (int i = 0; i < out; ++i) {
      const double d = delta[i] * scale;
      grads.biases[l][i] += d;
      double* row = grads.weights[l].data() + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) row[j] += d * x[j];
    }
    if (l == 0) break;
    std::vector<double> prev(in, 0.0);
    for (int i = 0; i < out; ++i) {
      const double d = delta[i];
      const double* row = m.weights[l].data() + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) prev[j] += d * row[j];
    }
    // cache[l] holds post-activation values of hidden layer l.
    for (int j = 0; j < in; ++j)
      prev[j] *= detail::act_deriv_from_value(m.activation, x[j]);
    delta = std::move(prev);
  }
}

inline ParamGrads backward(const MlpModel& m, std::span<const double> input,
                           std::span<const double> loss_grad_wrt_logits) {
  const auto cache = forward_cached(m, input);
  ParamGrads g = zeros_like(m);
  backward_accumulate(m, cache, loss_grad_wrt_logits, g);
  return g;
}

/// Flat parameter layout shared with the on-disk payload format: per layer,
/// weights row-major then biases, layers concatenated.
inline std::vector<double> flatten_params(const MlpModel& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(param_count(m)));
  for (int l = 0; l < m.num_layers(); ++l) {
    flat.insert(flat.end(), m.weights[l].begin(), m.weights[l].end());
    flat.insert(flat.end(), m.biases[l].begin(), m.biases[l].end());
  }
  return flat;
}

inline void unflatten_params(MlpModel& m, std::span<const double> flat) {
  if (static_cast<int64_t>(flat.size()) != param_count(m))
    throw ShapeError("parameter payload has " + std::to_string(flat.size()) +
                     " values, model expects " + std::to_string(param_count(m)));
  size_t pos = 0;
  for (int l = 0; l < m.num_layers(); ++l) {
    std::copy_n(flat.begin() + pos, m.weights[l].size(), m.weights[l].begin());
    pos += m.weights[l].size();
    std::copy_n(flat.begin() + pos, m.biases[l].size(), m.biases[l].begin());
    pos += m.biases[l].size();
  }
}

inline bool models_identical(const MlpModel& a, const MlpModel& b) {
  return a.layer_sizes == b.layer_sizes && a.activation == b.activation &&
         a.weights == b.weights && a.biases == b.biases;
}

}  // namespace distillab
