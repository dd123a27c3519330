// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "distillab/checkpoints.hpp"
#include "distillab/losses.hpp"

namespace distillab {

/// Full record of one per-phase checkpoint selection, kept for the schedule
/// trace artifacts.
struct ScheduleDecision {
  int phase = 0;
  int chosen_id = 0;
  std::vector<double> metric1;  // indexed by candidate id - 1
  std::vector<double> metric2;
  std::vector<double> total;
  uint64_t eval_fingerprint = 0;
};

/// Probability tables of every checkpoint on the frozen schedule-eval set.
struct CandidateTables {
  std::vector<ProbTable> by_id;  // by_id[j-1] belongs to checkpoint j
  int best_id = 0;

  int size() const { return static_cast<int>(by_id.size()); }
  const ProbTable& table(int id) const { return by_id[id - 1]; }
};

inline CandidateTables make_candidate_tables(const CheckpointStore& store,
                                             const SupervisedView& eval_view) {
  CandidateTables t;
  t.best_id = store.best_id;
  t.by_id.reserve(store.size());
  for (int id = 1; id <= store.size(); ++id)
    t.by_id.push_back(prob_table(store.by_id(id).model, eval_view));
  return t;
}

/// Mean position-averaged KL from the best checkpoint's distribution to
/// candidate j. Zero at j = best.
inline double metric1(const CandidateTables& tables, int j) {
  return mean_seq_kl(tables.table(tables.best_id), tables.table(j));
}

/// Mean position-averaged KL from the current (pre-phase) student
/// distribution to candidate j.
inline double metric2(const ProbTable& student_table, const CandidateTables& tables, int j) {
  return mean_seq_kl(student_table, tables.table(j));
}

/// Unified objective: argmin over candidates of metric1 + metric2, ties
/// resolved toward the larger id.
inline ScheduleDecision select_checkpoint(const CandidateTables& tables,
                                          const ProbTable& student_table, int phase) {
  if (tables.size() < 1) throw DataError("select_checkpoint: no candidates");
  ScheduleDecision d;
  d.phase = phase;
  d.eval_fingerprint = student_table.fingerprint;
  d.metric1.resize(tables.size());
  d.metric2.resize(tables.size());
  d.total.resize(tables.size());
  int best = 1;
  for (int j = 1; j <= tables.size(); ++j) {
    d.metric1[j - 1] = metric1(tables, j);
    d.metric2[j - 1] = metric2(student_table, tables, j);
    d.total[j - 1] = d.metric1[j - 1] + d.metric2[j - 1];
    if (d.total[j - 1] <= d.total[best - 1]) best = j;
  }
  d.chosen_id = best;
  return d;
}

/// Fixed (N,T)-progressive schedule: advance one checkpoint every T steps,
/// then stay on the final teacher.
inline int progressive_id(int n_checkpoints, int64_t steps_per_checkpoint, int64_t global_step) {
  if (n_checkpoints < 1 || steps_per_checkpoint < 1)
    throw ConfigError("progressive_id: N and T must be >= 1");
  if (global_step < 0) throw ConfigError("progressive_id: negative step");
  const int64_t j = global_step / steps_per_checkpoint + 1;
  return static_cast<int>(std::min<int64_t>(j, n_checkpoints));
}

}  // namespace distillab
