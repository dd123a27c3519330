// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "distillab/aw.hpp"
#include "distillab/common.hpp"
#include "distillab/losses.hpp"
#include "distillab/scheduler.hpp"
#include "distillab/tasks.hpp"

namespace distillab {

enum class RiskMode { ce, task_metric };

inline std::string to_string(RiskMode m) { return m == RiskMode::ce ? "ce" : "task_metric"; }

/// Per-sample student-minus-teacher risk differences with the
/// student-favored / teacher-favored partition and its aggregate terms.
///
/// `total` is formed as tfs_deficit - sfs_advantage with both partial sums
/// accumulated in sample-index order, so the decomposition identity holds
/// to the last bit.
struct RiskReport {
  RiskMode risk_mode = RiskMode::ce;
  std::vector<double> diff;     // d(x) per sample
  std::vector<int> sfs;         // sample ids with d <= 0
  std::vector<int> tfs;         // sample ids with d > 0
  double sfs_advantage = 0.0;   // sum over SFS of -d
  double tfs_deficit = 0.0;     // sum over TFS of d
  double total = 0.0;

  int n_sfs() const { return static_cast<int>(sfs.size()); }
  int n_tfs() const { return static_cast<int>(tfs.size()); }
};

namespace detail {

// Per-sample task score in [0,1]: fraction of the sample's positions
// predicted correctly.
inline double sample_score(const MlpModel& model, const SupervisedView& view, int sample) {
  const int lo = view.sample_offset[sample];
  const int hi = view.sample_offset[sample + 1];
  if (hi == lo) return 0.0;
  int correct = 0;
  for (int r = lo; r < hi; ++r) {
    const auto logits = forward(model, view.input_row(r));
    const int pred =
        static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (pred == view.targets[r]) ++correct;
  }
  return static_cast<double>(correct) / (hi - lo);
}

}  // namespace detail

inline RiskReport make_report(std::vector<double> diffs, RiskMode mode) {
  RiskReport rep;
  rep.risk_mode = mode;
  rep.diff = std::move(diffs);
  for (int i = 0; i < static_cast<int>(rep.diff.size()); ++i) {
    const double d = rep.diff[i];
    if (d <= 0.0) {
      rep.sfs.push_back(i);
      rep.sfs_advantage += -d;
    } else {
      rep.tfs.push_back(i);
      rep.tfs_deficit += d;
    }
  }
  rep.total = rep.tfs_deficit - rep.sfs_advantage;
  return rep;
}

/// d(x) = per-sample student risk minus teacher risk; ties (d = 0) land in
/// the student-favored set. CE mode uses sequence-summed cross-entropy; task
/// mode uses the score difference teacher - student.
inline RiskReport partition(const MlpModel& student, const MlpModel& teacher,
                            const SupervisedView& view, RiskMode mode = RiskMode::ce) {
  std::vector<double> diffs(view.n_samples);
  for (int i = 0; i < view.n_samples; ++i) {
    if (mode == RiskMode::ce) {
      diffs[i] = sample_ce(student, view, i) - sample_ce(teacher, view, i);
    } else {
      diffs[i] = detail::sample_score(teacher, view, i) - detail::sample_score(student, view, i);
    }
  }
  return make_report(std::move(diffs), mode);
}

struct SurpassDiagnostic {
  bool student_surpasses = false;
  double margin = 0.0;  // sfs_advantage - tfs_deficit
};

/// Empirical form of the surpass condition: the student wins when its SFS
/// advantage covers the TFS deficit. The theoretical bound terms are not
/// computable; the observed tfs_deficit stands in for them in reports.
inline SurpassDiagnostic surpass_diagnostic(const RiskReport& report) {
  SurpassDiagnostic d;
  d.margin = report.sfs_advantage - report.tfs_deficit;
  d.student_surpasses = report.total <= 0.0;
  return d;
}

/// Rows (rank, sample_id, diff) sorted descending by diff, ties stable by
/// sample id.
inline void sorted_diff_csv(const RiskReport& report, const std::filesystem::path& path) {
  std::vector<int> order(report.diff.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return report.diff[a] > report.diff[b]; });
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "rank,sample_id,diff\n";
  char buf[96];
  for (size_t r = 0; r < order.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%.12g\n", r + 1, order[r], report.diff[order[r]]);
    out << buf;
  }
}

/// Equal-width histogram of the AW weights over (0,1).
inline void aw_histogram_csv(const AwTable& table, int n_bins, const std::filesystem::path& path) {
  if (n_bins < 2) throw ConfigError("aw_histogram_csv: n_bins must be >= 2");
  std::vector<int64_t> counts(n_bins, 0);
  for (double w : table.w) {
    int bin = static_cast<int>(w * n_bins);
    bin = std::clamp(bin, 0, n_bins - 1);
    counts[bin] += 1;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "bin_lo,bin_hi,count\n";
  char buf[96];
  for (int b = 0; b < n_bins; ++b) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%lld\n", static_cast<double>(b) / n_bins,
                  static_cast<double>(b + 1) / n_bins, static_cast<long long>(counts[b]));
    out << buf;
  }
}

/// Long-format trace of every per-phase selection: one row per candidate.
inline void schedule_trace_csv(const std::vector<ScheduleDecision>& decisions,
                               const std::filesystem::path& path) {
  if (decisions.empty()) throw DataError("schedule_trace_csv: no decisions");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "phase,candidate_id,metric1,metric2,total,chosen\n";
  char buf[160];
  for (const auto& d : decisions) {
    for (size_t j = 0; j < d.total.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%d,%zu,%.12g,%.12g,%.12g,%d\n", d.phase, j + 1,
                    d.metric1[j], d.metric2[j], d.total[j],
                    static_cast<int>(j + 1 == static_cast<size_t>(d.chosen_id)));
      out << buf;
    }
  }
}

}  // namespace distillab
