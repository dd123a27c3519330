// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "distillab/losses.hpp"
#include "distillab/mlp.hpp"
#include "support.hpp"

using namespace distillab;

namespace {

// Straight-line re-implementation of the forward pass, kept deliberately
// dumb: explicit loops over the documented row-major layout.
std::vector<double> oracle_forward(const MlpModel& m, const std::vector<double>& input) {
  std::vector<double> x = input;
  for (size_t l = 0; l < m.weights.size(); ++l) {
    const int out = m.layer_sizes[l + 1];
    const int in = m.layer_sizes[l];
    std::vector<double> y(out);
    for (int i = 0; i < out; ++i) {
      double acc = m.biases[l][i];
      for (int j = 0; j < in; ++j) acc += m.weights[l][i * in + j] * x[j];
      if (l + 1 < m.weights.size()) {
        if (m.activation == Activation::relu) acc = acc > 0.0 ? acc : 0.0;
        else acc = std::tanh(acc);
      }
      y[i] = acc;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("forward with all-zero parameters is the zero map", "[mlp]") {
  MlpModel m = init_model({3, 4, 2}, Activation::relu, 1);
  for (auto& w : m.weights) std::fill(w.begin(), w.end(), 0.0);
  const auto logits = forward(m, std::vector<double>{0.3, -1.0, 2.5});
  REQUIRE(logits.size() == 2);
  REQUIRE(logits[0] == 0.0);
  REQUIRE(logits[1] == 0.0);
}

TEST_CASE("single identity layer passes the input through", "[mlp]") {
  MlpModel m;
  m.layer_sizes = {2, 2};
  m.weights = {{1.0, 0.0, 0.0, 1.0}};
  m.biases = {{0.0, 0.0}};
  const auto logits = forward(m, std::vector<double>{3.0, -2.0});
  REQUIRE(logits[0] == 3.0);
  REQUIRE(logits[1] == -2.0);
}

TEST_CASE("forward matches an independent re-implementation", "[mlp]") {
  const MlpModel m = init_model({2, 16, 2}, Activation::relu, 99);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> input = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const auto got = forward(m, input);
    const auto want = oracle_forward(m, input);
    for (size_t i = 0; i < want.size(); ++i)
      REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-12));
  }
}

TEST_CASE("forward matches the oracle with tanh hidden layers", "[mlp]") {
  const MlpModel m = init_model({3, 8, 8, 4}, Activation::tanh, 123);
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> input = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                                       rng.uniform(-2, 2)};
    const auto got = forward(m, input);
    const auto want = oracle_forward(m, input);
    for (size_t i = 0; i < want.size(); ++i)
      REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-12));
  }
}

TEST_CASE("forward rejects inputs of the wrong length", "[mlp]") {
  const MlpModel m = init_model({2, 4, 2}, Activation::relu, 1);
  REQUIRE_THROWS_AS(forward(m, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("zero loss gradient backpropagates to zero everywhere", "[mlp]") {
  const MlpModel m = init_model({2, 8, 2}, Activation::relu, 2);
  const auto g = backward(m, std::vector<double>{0.5, -0.5}, std::vector<double>{0.0, 0.0});
  for (const auto& w : g.weights)
    for (double v : w) REQUIRE(v == 0.0);
  for (const auto& b : g.biases)
    for (double v : b) REQUIRE(v == 0.0);
}

TEST_CASE("1-1 linear net has dW = x and db = 1 for loss = logit", "[mlp]") {
  MlpModel m;
  m.layer_sizes = {1, 1};
  m.weights = {{0.7}};
  m.biases = {{0.1}};
  const double x = -2.25;
  const auto g = backward(m, std::vector<double>{x}, std::vector<double>{1.0});
  REQUIRE(g.weights[0][0] == Catch::Approx(x).margin(1e-15));
  REQUIRE(g.biases[0][0] == 1.0);
}

TEST_CASE("analytic cross-entropy gradient matches finite differences", "[mlp]") {
  const MlpModel m = init_model({2, 8, 8, 2}, Activation::relu, 31);
  Rng rng(32);
  for (int trial = 0; trial < 3; ++trial) {
    const std::vector<double> input = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const int target = static_cast<int>(rng.uniform_int(0, 1));

    const auto cache = forward_cached(m, input);
    const auto q = softmax(cache.back());
    ParamGrads analytic = zeros_like(m);
    backward_accumulate(m, cache, grad_ce_wrt_logits(q, target), analytic);

    const auto fd = testsupport::finite_diff_grads(m, [&](const MlpModel& probe) {
      return cross_entropy(target, softmax(forward(probe, input)));
    });
    REQUIRE(testsupport::max_rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("backward rejects a loss gradient of the wrong length", "[mlp]") {
  const MlpModel m = init_model({2, 4, 2}, Activation::relu, 3);
  REQUIRE_THROWS_AS(backward(m, std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}),
                    ShapeError);
}

TEST_CASE("param_count matches the closed form", "[mlp]") {
  REQUIRE(param_count({2, 128, 128, 2}) == 17154);
  REQUIRE(param_count({2, 8, 2}) == 42);
  REQUIRE(param_count({2, 128, 2}) == 642);
  const MlpModel m = init_model({2, 8, 2}, Activation::relu, 4);
  REQUIRE(param_count(m) == 42);
}

TEST_CASE("initialization is seeded, bounded, and zero-biased", "[mlp]") {
  const MlpModel a = init_model({2, 16, 3}, Activation::relu, 10);
  const MlpModel b = init_model({2, 16, 3}, Activation::relu, 10);
  const MlpModel c = init_model({2, 16, 3}, Activation::relu, 11);
  REQUIRE(models_identical(a, b));
  REQUIRE_FALSE(models_identical(a, c));

  const double bound0 = std::sqrt(6.0 / (2 + 16));
  for (double v : a.weights[0]) {
    REQUIRE(v >= -bound0);
    REQUIRE(v <= bound0);
  }
  for (const auto& bias : a.biases)
    for (double v : bias) REQUIRE(v == 0.0);
}

TEST_CASE("flatten and unflatten round-trip parameters", "[mlp]") {
  const MlpModel m = init_model({3, 5, 4}, Activation::tanh, 8);
  const auto flat = flatten_params(m);
  REQUIRE(static_cast<int64_t>(flat.size()) == param_count(m));
  MlpModel copy = init_model({3, 5, 4}, Activation::tanh, 9);
  unflatten_params(copy, flat);
  REQUIRE(models_identical(m, copy));
  REQUIRE_THROWS_AS(unflatten_params(copy, std::vector<double>(flat.size() - 1)), ShapeError);
}
