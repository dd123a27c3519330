// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal end-to-end tour: generate the sine task, SFT a teacher with
// checkpoints, distill a small student with scheduled checkpoint selection,
// and print the risk decomposition. Runs in a few seconds.

#include <cstdio>

#include "distillab/analysis.hpp"
#include "distillab/checkpoints.hpp"
#include "distillab/distill.hpp"
#include "distillab/tasks.hpp"

using namespace distillab;

int main() {
  const uint64_t seed = 7;
  auto [train_set, test_set] = gen_sine(seed, 600, 600);
  const SupervisedView train = make_view(train_set);
  const SupervisedView test = make_view(test_set);

  SftConfig sft;
  sft.total_steps = 400;
  sft.n_checkpoints = 4;
  sft.peak_lr = 3e-3;
  sft.seed = seed;
  const MlpModel teacher_init = init_model({2, 32, 32, 2}, Activation::relu, seed);
  const CheckpointStore store = train_sft(teacher_init, train, test, sft);
  std::printf("teacher: %d checkpoints, best id %d, val acc %.3f\n", store.size(),
              store.best_id, store.best().val_accuracy);

  DistillConfig cfg;
  cfg.method = Method::scd;
  cfg.n_phases = 4;
  cfg.steps_per_phase = 150;
  cfg.peak_lr = 1e-2;
  cfg.seed = seed;
  const MlpModel student_init = init_model({2, 8, 2}, Activation::relu, seed + 1);
  const SupervisedView sched_eval = subset_view(test, 128);

  DistillInputs in;
  in.store = &store;
  in.student_init = &student_init;
  in.train = &train;
  in.test = &test;
  in.sched_eval = &sched_eval;

  const RunResult result = run(cfg, in);
  std::printf("student: best test acc %.3f (step %lld), final %.3f\n", result.log.best_metric,
              static_cast<long long>(result.log.best_step), result.log.final_metric);
  for (const auto& d : result.log.decisions)
    std::printf("  phase %d -> checkpoint %d\n", d.phase, d.chosen_id);

  const RiskReport report = partition(result.best_student, store.best().model, test);
  const SurpassDiagnostic diag = surpass_diagnostic(report);
  std::printf("risk split: %d student-favored, %d teacher-favored, margin %.4f, surpasses=%s\n",
              report.n_sfs(), report.n_tfs(), diag.margin,
              diag.student_surpasses ? "yes" : "no");
  return 0;
}
