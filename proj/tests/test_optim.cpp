// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "distillab/optim.hpp"

using namespace distillab;

namespace {

MlpModel scalar_model(double value) {
  MlpModel m;
  m.layer_sizes = {1, 1};
  m.weights = {{value}};
  m.biases = {{}};  // no bias to keep it a single parameter
  return m;
}

}  // namespace

TEST_CASE("lr 0 with no weight decay leaves the model unchanged but moves moments",
          "[optim]") {
  MlpModel m = init_model({2, 4, 2}, Activation::relu, 5);
  const MlpModel before = m;
  OptimState s = make_adamw(m, /*weight_decay=*/0.0);
  ParamGrads g = zeros_like(m);
  for (auto& w : g.weights)
    for (double& v : w) v = 0.25;
  adamw_step(m, g, s, 0.0);
  REQUIRE(models_identical(m, before));
  REQUIRE(s.step_count == 1);
  REQUIRE(s.m.weights[0][0] != 0.0);
  REQUIRE(s.v.weights[0][0] != 0.0);
}

TEST_CASE("global-norm clipping scales gradients before the moment update", "[optim]") {
  MlpModel m = scalar_model(0.0);
  OptimState s = make_adamw(m, 0.0, /*grad_clip_norm=*/1.0);
  ParamGrads g = zeros_like(m);
  g.weights[0][0] = 10.0;  // global norm 10, clip 1.0 -> effective gradient 1.0
  adamw_step(m, g, s, 0.0);
  const double eff = 10.0 * 0.1;
  REQUIRE(s.m.weights[0][0] == Catch::Approx((1.0 - s.beta1) * eff).margin(1e-15));
  REQUIRE(s.v.weights[0][0] == Catch::Approx((1.0 - s.beta2) * eff * eff).margin(1e-15));
}

TEST_CASE("parameter trajectory matches a scalar AdamW re-implementation", "[optim]") {
  MlpModel m = scalar_model(1.0);
  OptimState s = make_adamw(m, /*weight_decay=*/0.0, /*grad_clip_norm=*/0.0);
  ParamGrads g = zeros_like(m);
  g.weights[0][0] = 1.0;

  // Independent scalar AdamW with the same hyperparameters.
  double param = 1.0, m1 = 0.0, v1 = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.95, eps = 1e-8;
  for (int t = 1; t <= 3; ++t) {
    adamw_step(m, g, s, lr);
    m1 = b1 * m1 + (1 - b1) * 1.0;
    v1 = b2 * v1 + (1 - b2) * 1.0;
    const double mh = m1 / (1 - std::pow(b1, t));
    const double vh = v1 / (1 - std::pow(b2, t));
    param -= lr * mh / (std::sqrt(vh) + eps);
    REQUIRE(m.weights[0][0] == Catch::Approx(param).margin(1e-12));
  }
  REQUIRE(s.step_count == 3);
}

TEST_CASE("decoupled weight decay shrinks parameters independently of gradients", "[optim]") {
  MlpModel m = scalar_model(2.0);
  OptimState s = make_adamw(m, /*weight_decay=*/0.5, /*grad_clip_norm=*/0.0);
  ParamGrads g = zeros_like(m);  // zero gradient: only decay acts
  adamw_step(m, g, s, 0.1);
  REQUIRE(m.weights[0][0] == Catch::Approx(2.0 - 0.1 * 0.5 * 2.0).margin(1e-15));
}

TEST_CASE("non-finite gradients abort with the parameter block named", "[optim]") {
  MlpModel m = init_model({2, 4, 2}, Activation::relu, 6);
  OptimState s = make_adamw(m);
  ParamGrads g = zeros_like(m);
  g.biases[1][0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adamw_step(m, g, s, 0.01);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    REQUIRE(std::string(e.what()).find("layer 1 biases") != std::string::npos);
  }
}

TEST_CASE("cosine schedule hits the documented anchor points", "[optim]") {
  const LrSchedule s{1e-2, 100, 0.1};
  const int64_t warmup = 10;
  REQUIRE(lr_at(s, 0) == 0.0);
  REQUIRE(lr_at(s, warmup) == Catch::Approx(1e-2).margin(1e-15));
  REQUIRE(lr_at(s, 100) == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(lr_at(s, (warmup + 100) / 2) == Catch::Approx(0.5e-2).margin(1e-12));
  REQUIRE(lr_at(s, 5) == Catch::Approx(0.5e-2).margin(1e-15));  // linear half-way up
}

TEST_CASE("schedule rejects steps outside its range", "[optim]") {
  const LrSchedule s{1e-3, 50, 0.1};
  REQUIRE_THROWS_AS(lr_at(s, -1), ConfigError);
  REQUIRE_THROWS_AS(lr_at(s, 51), ConfigError);
}

TEST_CASE("lr is continuous across the warmup boundary", "[optim]") {
  const LrSchedule s{2e-3, 1000, 0.1};
  const int64_t w = 100;
  const double before = lr_at(s, w - 1);
  const double at = lr_at(s, w);
  REQUIRE(at - before < 2e-3 / 100 + 1e-12);
  REQUIRE(at >= before);
}
