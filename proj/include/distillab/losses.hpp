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
#include "distillab/mlp.hpp"
#include "distillab/tasks.hpp"

namespace distillab {

// Probability floor inside logs; keeps one-hot collisions finite.
inline constexpr double kProbEps = 1e-12;

/// Counts probability clamps so runs can flag them in their logs.
struct ClampStats {
  int64_t clamped = 0;
};

inline void validate_prob_vec(std::span<const double> p, double tol = 1e-9) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DataError("probability vector has a negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol)
    throw DataError("probability vector sums to " + std::to_string(sum) + ", expected 1");
}

/// Max-subtracted softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty logits");
  double max = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw DataError("softmax: non-finite logit");
    max = std::max(max, v);
  }
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - max);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

/// -log q[target], with q[target] floored at kProbEps.
inline double cross_entropy(int target, std::span<const double> q, ClampStats* stats = nullptr) {
  if (target < 0 || target >= static_cast<int>(q.size()))
    throw ShapeError("cross_entropy: target index out of range");
  double p = q[target];
  if (p < kProbEps) {
    p = kProbEps;
    if (stats) stats->clamped += 1;
  }
  return -std::log(p);
}

/// Forward KL divergence sum_i p_i ln(p_i / q_i), with 0 ln 0 = 0 and q
/// floored at kProbEps.
inline double kl_forward(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_forward: dimension mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * std::log(p[i] / std::max(q[i], kProbEps));
  }
  return kl;
}

inline double kl_reverse(std::span<const double> p_teacher, std::span<const double> q_student) {
  return kl_forward(q_student, p_teacher);
}

/// d KL(p || softmax(z)) / dz for fixed p.
inline std::vector<double> grad_kl_forward_wrt_logits(std::span<const double> p,
                                                      std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl gradient: dimension mismatch");
  std::vector<double> g(q.size());
  for (size_t i = 0; i < q.size(); ++i) g[i] = q[i] - p[i];
  return g;
}

/// d KL(softmax(z) || p) / dz = q * (ln(q/p) - KL(q||p)).
inline std::vector<double> grad_kl_reverse_wrt_logits(std::span<const double> p_teacher,
                                                      std::span<const double> q_student) {
  if (p_teacher.size() != q_student.size()) throw ShapeError("kl gradient: dimension mismatch");
  const size_t n = q_student.size();
  std::vector<double> logratio(n);
  double kl = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double q = q_student[i];
    logratio[i] = std::log(std::max(q, kProbEps) / std::max(p_teacher[i], kProbEps));
    if (q > 0.0) kl += q * logratio[i];
  }
  std::vector<double> g(n);
  for (size_t i = 0; i < n; ++i) g[i] = q_student[i] * (logratio[i] - kl);
  return g;
}

/// d (-log softmax(z)[target]) / dz = q - onehot(target).
inline std::vector<double> grad_ce_wrt_logits(std::span<const double> q, int target) {
  if (target < 0 || target >= static_cast<int>(q.size()))
    throw ShapeError("ce gradient: target index out of range");
  std::vector<double> g(q.begin(), q.end());
  g[target] -= 1.0;
  return g;
}

/// Interpolated target softmax((1-t) * student_logits + t * teacher_logits).
/// Student logits are treated as detached: no gradient flows through the
/// target.
inline std::vector<double> taid_target(double t, std::span<const double> student_logits_detached,
                                       std::span<const double> teacher_logits) {
  if (t < 0.0 || t > 1.0) throw ConfigError("taid: t must be in [0,1]");
  if (student_logits_detached.size() != teacher_logits.size())
    throw ShapeError("taid: logit dimension mismatch");
  std::vector<double> mix(teacher_logits.size());
  for (size_t i = 0; i < mix.size(); ++i)
    mix[i] = (1.0 - t) * student_logits_detached[i] + t * teacher_logits[i];
  return softmax(mix);
}

inline double taid_loss(double t, std::span<const double> teacher_logits,
                        std::span<const double> student_logits) {
  const auto target = taid_target(t, student_logits, teacher_logits);
  const auto q = softmax(student_logits);
  return kl_forward(target, q);
}

inline double compound_loss(double alpha, double distill_term, double ce_term) {
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("compound loss: alpha must be in [0,1]");
  if (!std::isfinite(distill_term) || !std::isfinite(ce_term))
    throw DivergenceError("compound loss: non-finite term");
  return alpha * distill_term + (1.0 - alpha) * ce_term;
}

/// Per-sample, per-position probability rows of one model over a fixed view.
/// The fingerprint binds the table to the dataset it was computed on.
struct ProbTable {
  int dim = 0;
  std::vector<int> sample_offset;  // size n_samples+1
  std::vector<double> probs;       // n_rows x dim
  uint64_t fingerprint = 0;

  int n_samples() const { return static_cast<int>(sample_offset.size()) - 1; }
  int n_rows() const { return dim == 0 ? 0 : static_cast<int>(probs.size()) / dim; }
  std::span<const double> row(int r) const {
    return {probs.data() + static_cast<size_t>(r) * dim, static_cast<size_t>(dim)};
  }
};

inline ProbTable prob_table(const MlpModel& model, const SupervisedView& view) {
  if (model.input_dim() != view.input_dim || model.output_dim() != view.n_classes)
    throw ShapeError("prob_table: model dims do not match view");
  ProbTable t;
  t.dim = view.n_classes;
  t.sample_offset = view.sample_offset;
  t.fingerprint = view.fingerprint;
  t.probs.reserve(static_cast<size_t>(view.n_rows()) * t.dim);
  for (int r = 0; r < view.n_rows(); ++r) {
    const auto p = softmax(forward(model, view.input_row(r)));
    t.probs.insert(t.probs.end(), p.begin(), p.end());
  }
  return t;
}

inline void check_same_source(const ProbTable& a, const ProbTable& b) {
  if (a.fingerprint != b.fingerprint)
    throw DataError("probability tables come from different datasets (fingerprint mismatch)");
  if (a.dim != b.dim || a.sample_offset != b.sample_offset)
    throw ShapeError("probability tables have mismatched shapes");
}

/// Position-averaged forward KL per sample, then mean over samples.
inline double mean_seq_kl(const ProbTable& from, const ProbTable& to) {
  check_same_source(from, to);
  const int n = from.n_samples();
  if (n == 0) throw DataError("mean_seq_kl: empty table");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int lo = from.sample_offset[i];
    const int hi = from.sample_offset[i + 1];
    double acc = 0.0;
    for (int r = lo; r < hi; ++r) acc += kl_forward(from.row(r), to.row(r));
    total += hi > lo ? acc / (hi - lo) : 0.0;
  }
  return total / n;
}

/// Sequence-summed cross-entropy of one sample under a model.
inline double sample_ce(const MlpModel& model, const SupervisedView& view, int sample,
                        ClampStats* stats = nullptr) {
  double loss = 0.0;
  for (int r = view.sample_offset[sample]; r < view.sample_offset[sample + 1]; ++r) {
    const auto q = softmax(forward(model, view.input_row(r)));
    loss += cross_entropy(view.targets[r], q, stats);
  }
  return loss;
}

/// Mean over samples of sequence-summed cross-entropy.
inline double mean_sample_ce(const MlpModel& model, const SupervisedView& view,
                             ClampStats* stats = nullptr) {
  if (view.n_samples == 0) throw DataError("mean_sample_ce: empty view");
  double total = 0.0;
  for (int i = 0; i < view.n_samples; ++i) total += sample_ce(model, view, i, stats);
  return total / view.n_samples;
}

/// Fraction of rows whose argmax matches the target.
inline double row_accuracy(const MlpModel& model, const SupervisedView& view) {
  if (view.n_rows() == 0) throw DataError("row_accuracy: empty view");
  int correct = 0;
  for (int r = 0; r < view.n_rows(); ++r) {
    const auto logits = forward(model, view.input_row(r));
    const int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                                      logits.begin());
    if (pred == view.targets[r]) ++correct;
  }
  return static_cast<double>(correct) / view.n_rows();
}

}  // namespace distillab
