// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "distillab/mlp.hpp"
#include "distillab/rng.hpp"

namespace testsupport {

/// Unique scratch directory, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<uint64_t> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("distillab_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline std::vector<double> rand_prob_vec(distillab::Rng& rng, int dim) {
  std::vector<double> p(dim);
  double sum = 0.0;
  for (double& v : p) {
    v = rng.uniform() + 1e-3;
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

inline std::vector<double> rand_logits(distillab::Rng& rng, int dim, double scale = 3.0) {
  std::vector<double> z(dim);
  for (double& v : z) v = rng.uniform(-scale, scale);
  return z;
}

/// Central finite differences of a scalar loss over every model parameter.
inline distillab::ParamGrads finite_diff_grads(
    const distillab::MlpModel& model,
    const std::function<double(const distillab::MlpModel&)>& loss, double h = 1e-5) {
  distillab::MlpModel probe = model;
  distillab::ParamGrads fd = distillab::zeros_like(model);
  auto flat = distillab::flatten_params(model);
  for (size_t k = 0; k < flat.size(); ++k) {
    const double orig = flat[k];
    flat[k] = orig + h;
    distillab::unflatten_params(probe, flat);
    const double up = loss(probe);
    flat[k] = orig - h;
    distillab::unflatten_params(probe, flat);
    const double down = loss(probe);
    flat[k] = orig;
    const double g = (up - down) / (2.0 * h);
    // Route the flat index back into the layered layout.
    size_t pos = k;
    for (size_t l = 0; l < fd.weights.size(); ++l) {
      if (pos < fd.weights[l].size()) {
        fd.weights[l][pos] = g;
        break;
      }
      pos -= fd.weights[l].size();
      if (pos < fd.biases[l].size()) {
        fd.biases[l][pos] = g;
        break;
      }
      pos -= fd.biases[l].size();
    }
  }
  distillab::unflatten_params(probe, flat);
  return fd;
}

/// max over entries of |a - b| / (|b| + 1e-8).
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / (std::abs(b[i]) + 1e-8));
  return worst;
}

inline double max_rel_err(const distillab::ParamGrads& a, const distillab::ParamGrads& b) {
  double worst = 0.0;
  for (size_t l = 0; l < a.weights.size(); ++l) {
    worst = std::max(worst, max_rel_err(a.weights[l], b.weights[l]));
    worst = std::max(worst, max_rel_err(a.biases[l], b.biases[l]));
  }
  return worst;
}

inline std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<int> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double mid = 0.5 * (i + j) + 1.0;  // average rank for ties
    for (size_t k = i; k <= j; ++k) r[order[k]] = mid;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto rx = ranks(xs);
  const auto ry = ranks(ys);
  const size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

}  // namespace testsupport
