// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "distillab/common.hpp"
#include "distillab/losses.hpp"
#include "distillab/mlp.hpp"
#include "distillab/tasks.hpp"

namespace distillab {

// Loss floor before the ratio; keeps the log finite when a reference model
// is exactly confident-correct.
inline constexpr double kLossEps = 1e-8;

/// sigmoid(ln(L_S / L_T)) computed in closed form as L_S / (L_S + L_T).
/// Strictly inside (0,1) thanks to the loss floor.
inline double soft_aw(double student_loss, double teacher_loss) {
  if (student_loss < 0.0 || teacher_loss < 0.0)
    throw DataError("soft_aw: losses must be nonnegative");
  const double ls = std::max(student_loss, kLossEps);
  const double lt = std::max(teacher_loss, kLossEps);
  return ls / (ls + lt);
}

enum class HardAwMode { distill_only, ce_only, td };

/// Hard variant: pure distillation where the teacher is clearly better,
/// pure CE where the student is, the 0.5/0.5 compound otherwise.
inline HardAwMode hard_aw(double student_loss, double teacher_loss, double tau = 0.0) {
  if (student_loss < 0.0 || teacher_loss < 0.0)
    throw DataError("hard_aw: losses must be nonnegative");
  if (tau < 0.0) throw ConfigError("hard_aw: tau must be >= 0");
  if (teacher_loss < student_loss - tau) return HardAwMode::distill_only;
  if (student_loss < teacher_loss - tau) return HardAwMode::ce_only;
  return HardAwMode::td;
}

/// Per-sample mixing weights computed once from two frozen reference models.
struct AwTable {
  std::vector<double> w;
  std::vector<double> student_loss;
  std::vector<double> teacher_loss;
  int student_ref_id = 0;  // checkpoint id of the student SFT reference
  int teacher_ref_id = 0;  // checkpoint id of the teacher reference
  uint64_t fingerprint = 0;

  int size() const { return static_cast<int>(w.size()); }
};

/// One gradient-free forward pass of each reference model per sample, then
/// the soft weight. teacher_ref is the final teacher for plain AW or the
/// phase checkpoint under scheduled distillation.
inline AwTable compute_aw_table(const MlpModel& student_ref, const MlpModel& teacher_ref,
                                const SupervisedView& view, int student_ref_id = 0,
                                int teacher_ref_id = 0) {
  AwTable t;
  t.student_ref_id = student_ref_id;
  t.teacher_ref_id = teacher_ref_id;
  t.fingerprint = view.fingerprint;
  t.w.resize(view.n_samples);
  t.student_loss.resize(view.n_samples);
  t.teacher_loss.resize(view.n_samples);
  for (int i = 0; i < view.n_samples; ++i) {
    t.student_loss[i] = sample_ce(student_ref, view, i);
    t.teacher_loss[i] = sample_ce(teacher_ref, view, i);
    t.w[i] = soft_aw(t.student_loss[i], t.teacher_loss[i]);
  }
  return t;
}

/// w * distill + (1-w) * ce. Replaces the global alpha when AW is active.
inline double aw_loss(double w, double distill_term, double ce_term) {
  if (!(w > 0.0 && w < 1.0)) throw DataError("aw_loss: weight must be strictly inside (0,1)");
  if (!std::isfinite(distill_term) || !std::isfinite(ce_term))
    throw DivergenceError("aw_loss: non-finite term");
  return w * distill_term + (1.0 - w) * ce_term;
}

inline void aw_table_csv(const AwTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "sample_id,L_S,L_T,w\n";
  char buf[120];
  for (int i = 0; i < table.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g\n", i, table.student_loss[i],
                  table.teacher_loss[i], table.w[i]);
    out << buf;
  }
}

}  // namespace distillab
