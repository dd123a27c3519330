// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "distillab/common.hpp"
#include "distillab/mlp.hpp"

namespace distillab {

/// AdamW hyperparameters plus per-parameter moment state.
struct OptimState {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
  int64_t step_count = 0;
  ParamGrads m;  // first moments
  ParamGrads v;  // second moments
};

inline OptimState make_adamw(const MlpModel& model, double weight_decay = 0.01,
                             double grad_clip_norm = 1.0, double beta1 = 0.9,
                             double beta2 = 0.95, double eps = 1e-8) {
  OptimState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  s.weight_decay = weight_decay;
  s.grad_clip_norm = grad_clip_norm;
  s.m = zeros_like(model);
  s.v = zeros_like(model);
  return s;
}

inline double global_grad_norm(const ParamGrads& g) {
  double sq = 0.0;
  for (const auto& w : g.weights)
    for (double v : w) sq += v * v;
  for (const auto& b : g.biases)
    for (double v : b) sq += v * v;
  return std::sqrt(sq);
}

namespace detail {

inline void check_finite_block(const std::vector<double>& block, const std::string& name) {
  for (double v : block)
    if (!std::isfinite(v))
      throw DivergenceError("non-finite gradient in " + name);
}

}  // namespace detail

/// One AdamW step: global-norm clip, bias-corrected moments, decoupled weight
/// decay. Moments are updated even at lr = 0.
inline void adamw_step(MlpModel& model, const ParamGrads& grads, OptimState& state, double lr) {
  if (lr < 0.0) throw ConfigError("adamw_step: negative learning rate");
  if (grads.weights.size() != model.weights.size() || grads.biases.size() != model.biases.size())
    throw ShapeError("adamw_step: gradient layer count does not match model");

  for (size_t l = 0; l < model.weights.size(); ++l) {
    if (grads.weights[l].size() != model.weights[l].size() ||
        grads.biases[l].size() != model.biases[l].size())
      throw ShapeError("adamw_step: gradient shape mismatch at layer " + std::to_string(l));
    detail::check_finite_block(grads.weights[l], "layer " + std::to_string(l) + " weights");
    detail::check_finite_block(grads.biases[l], "layer " + std::to_string(l) + " biases");
  }

  double clip_scale = 1.0;
  if (state.grad_clip_norm > 0.0) {
    const double norm = global_grad_norm(grads);
    if (norm > state.grad_clip_norm) clip_scale = state.grad_clip_norm / norm;
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  auto update_block = [&](std::vector<double>& param, const std::vector<double>& grad,
                          std::vector<double>& m, std::vector<double>& v) {
    for (size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i] * clip_scale;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      param[i] -= lr * (m_hat / (std::sqrt(v_hat) + state.eps) + state.weight_decay * param[i]);
    }
  };

  for (size_t l = 0; l < model.weights.size(); ++l) {
    update_block(model.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l]);
    update_block(model.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l]);
  }
}

/// Linear warmup to peak_lr over round(warmup_ratio * total_steps) steps,
/// then cosine decay to zero at total_steps.
struct LrSchedule {
  double peak_lr = 1e-3;
  int64_t total_steps = 1;
  double warmup_ratio = 0.1;
};

inline double lr_at(const LrSchedule& s, int64_t step) {
  if (s.peak_lr <= 0.0) throw ConfigError("lr schedule: peak_lr must be > 0");
  if (s.total_steps <= 0) throw ConfigError("lr schedule: total_steps must be > 0");
  if (s.warmup_ratio < 0.0 || s.warmup_ratio >= 1.0)
    throw ConfigError("lr schedule: warmup_ratio must be in [0,1)");
  if (step < 0 || step > s.total_steps)
    throw ConfigError("lr schedule: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(s.total_steps) + "]");

  const int64_t warmup_steps = std::llround(s.warmup_ratio * static_cast<double>(s.total_steps));
  if (step < warmup_steps)
    return s.peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(s.total_steps - warmup_steps);
  return s.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace distillab
