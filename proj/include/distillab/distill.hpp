// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "distillab/aw.hpp"
#include "distillab/checkpoints.hpp"
#include "distillab/losses.hpp"
#include "distillab/mlp.hpp"
#include "distillab/optim.hpp"
#include "distillab/scheduler.hpp"
#include "distillab/tasks.hpp"

namespace distillab {

enum class Method { sft_only, td, rkl, taid, cd, scd, scd_aw };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::sft_only: return "sft_only";
    case Method::td: return "td";
    case Method::rkl: return "rkl";
    case Method::taid: return "taid";
    case Method::cd: return "cd";
    case Method::scd: return "scd";
    case Method::scd_aw: return "scd_aw";
  }
  throw ConfigError("unknown method enum value");
}

inline Method method_from_string(std::string_view s) {
  if (s == "sft_only") return Method::sft_only;
  if (s == "td") return Method::td;
  if (s == "rkl") return Method::rkl;
  if (s == "taid") return Method::taid;
  if (s == "cd") return Method::cd;
  if (s == "scd") return Method::scd;
  if (s == "scd_aw") return Method::scd_aw;
  throw ConfigError("unknown method '" + std::string(s) +
                    "' (expected sft_only|td|rkl|taid|cd|scd|scd_aw)");
}

inline bool needs_store(Method m) { return m != Method::sft_only; }
inline bool is_scheduled(Method m) { return m == Method::scd || m == Method::scd_aw; }

enum class InitFrom { scratch, student_sft };

struct DistillConfig {
  Method method = Method::td;
  double alpha = 0.5;
  int n_phases = 8;              // N
  int64_t steps_per_phase = 250; // T; optimizer and LR schedule reset every T steps
  int batch_size = 8;
  double peak_lr = 1e-2;
  double warmup_ratio = 0.1;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  uint64_t seed = 0;
  int64_t eval_every = 50;
  int schedule_eval_samples = 256;
  InitFrom init_from = InitFrom::scratch;

  int64_t total_steps() const { return static_cast<int64_t>(n_phases) * steps_per_phase; }
};

struct StepRecord {
  int64_t step = 0;
  int phase = 0;
  int teacher_id = 0;  // 0 when no teacher is involved
  double loss = 0.0;
  double distill_term = 0.0;
  double ce_term = 0.0;
  double lr = 0.0;
};

struct EvalRecord {
  int64_t step = 0;
  double test_metric = 0.0;  // per-position accuracy
  double test_ce = 0.0;      // mean sequence-summed CE
};

struct RunLog {
  std::string method;
  uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::vector<ScheduleDecision> decisions;  // per phase, scheduled methods only
  std::vector<int> phase_teacher_ids;       // indexed by phase-1
  double best_metric = 0.0;
  int64_t best_step = -1;
  double final_metric = 0.0;
  double final_ce = 0.0;
  int64_t clamp_events = 0;
};

struct RunResult {
  MlpModel final_student;
  MlpModel best_student;
  RunLog log;
};

/// Test hook: phases expose the freshly reset optimizer, steps expose the
/// sampled batch. Methods must see identical batch streams for a seed.
struct RunObserver {
  virtual void on_phase_start(int phase, int teacher_id, const OptimState& opt,
                              const MlpModel& student) {}
  virtual void on_step(int64_t global_step, std::span<const int> batch) {}
  virtual ~RunObserver() = default;
};

/// Per-phase teacher context for a single optimization step.
struct TeacherContext {
  const MlpModel* teacher = nullptr;  // null only for sft_only
  int teacher_id = 0;
  double taid_t = 0.0;         // interpolation weight, taid only
  const AwTable* aw = nullptr; // per-sample weights, scd_aw only
};

/// One optimizer step on a batch of samples. Loss is the per-method
/// combination averaged over the batch; the matching exact gradient is
/// applied through AdamW.
inline StepRecord distill_step(Method method, double alpha, const SupervisedView& view,
                               std::span<const int> batch, MlpModel& student, OptimState& opt,
                               double lr, const TeacherContext& ctx,
                               ClampStats* stats = nullptr) {
  if (needs_store(method) && ctx.teacher == nullptr)
    throw MissingArtifactError("distill_step: method " + to_string(method) +
                               " requires a teacher model");
  if (method == Method::scd_aw && ctx.aw == nullptr)
    throw MissingArtifactError("distill_step: scd_aw requires an AW table");
  if (method == Method::scd_aw && ctx.aw->fingerprint != view.fingerprint)
    throw DataError("distill_step: AW table fingerprint does not match the training view");

  ParamGrads grads = zeros_like(student);
  const double batch_scale = 1.0 / static_cast<double>(batch.size());
  double distill_sum = 0.0;
  double ce_sum = 0.0;
  double loss_sum = 0.0;

  for (int sample : batch) {
    const int lo = view.sample_offset[sample];
    const int hi = view.sample_offset[sample + 1];
    const int positions = hi - lo;
    if (positions == 0) continue;
    const double inv_s = 1.0 / positions;

    // Mixing coefficients for this sample: loss = a*distill + b*ce.
    double a = alpha;
    double b = 1.0 - alpha;
    if (method == Method::sft_only) {
      a = 0.0;
      b = 1.0;
    } else if (method == Method::scd_aw) {
      a = ctx.aw->w[sample];
      b = 1.0 - a;
    }

    double distill_i = 0.0;
    double ce_i = 0.0;
    for (int r = lo; r < hi; ++r) {
      const auto cache = forward_cached(student, view.input_row(r));
      const auto q = softmax(cache.back());
      const int target = view.targets[r];

      ce_i += cross_entropy(target, q, stats);
      std::vector<double> grad_logits = grad_ce_wrt_logits(q, target);
      for (double& g : grad_logits) g *= b;

      if (method != Method::sft_only) {
        const auto teacher_logits = forward(*ctx.teacher, view.input_row(r));
        const auto p = softmax(teacher_logits);
        std::vector<double> dgrad;
        double dval = 0.0;
        switch (method) {
          case Method::rkl:
            dval = kl_reverse(p, q);
            dgrad = grad_kl_reverse_wrt_logits(p, q);
            break;
          case Method::taid: {
            const auto target_dist = taid_target(ctx.taid_t, cache.back(), teacher_logits);
            dval = kl_forward(target_dist, q);
            dgrad = grad_kl_forward_wrt_logits(target_dist, q);
            break;
          }
          default:  // td, cd, scd, scd_aw share the forward-KL distill term
            dval = kl_forward(p, q);
            dgrad = grad_kl_forward_wrt_logits(p, q);
            break;
        }
        // Position-averaged distill term.
        distill_i += dval * inv_s;
        for (size_t k = 0; k < grad_logits.size(); ++k)
          grad_logits[k] += a * inv_s * dgrad[k];
      }
      backward_accumulate(student, cache, grad_logits, grads, batch_scale);
    }

    distill_sum += distill_i;
    ce_sum += ce_i;
    loss_sum += a * distill_i + b * ce_i;
  }

  StepRecord rec;
  rec.teacher_id = ctx.teacher_id;
  rec.distill_term = distill_sum * batch_scale;
  rec.ce_term = ce_sum * batch_scale;
  rec.loss = loss_sum * batch_scale;
  rec.lr = lr;
  if (!std::isfinite(rec.loss))
    throw DivergenceError("distillation loss became non-finite");
  adamw_step(student, grads, opt, lr);
  return rec;
}

struct DistillInputs {
  const CheckpointStore* store = nullptr;     // required unless sft_only
  const MlpModel* student_init = nullptr;     // random init (scratch mode)
  const MlpModel* student_sft_ref = nullptr;  // frozen AW reference, scd_aw only
  const SupervisedView* train = nullptr;
  const SupervisedView* test = nullptr;
  const SupervisedView* sched_eval = nullptr; // frozen subset for scd/scd_aw
};

/// Runs the shared phase protocol: N phases of T steps, optimizer state and
/// LR schedule reset at each phase boundary, method-specific teacher signal,
/// periodic held-out evaluation, best snapshot retained.
inline RunResult run(const DistillConfig& cfg, const DistillInputs& in,
                     RunObserver* observer = nullptr) {
  if (cfg.n_phases < 1 || cfg.steps_per_phase < 1)
    throw ConfigError("distill run: n_phases and steps_per_phase must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("distill run: batch_size must be >= 1");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("distill run: alpha must be in [0,1]");
  if (in.student_init == nullptr || in.train == nullptr || in.test == nullptr)
    throw ConfigError("distill run: missing student init or dataset views");
  if (needs_store(cfg.method)) {
    if (in.store == nullptr)
      throw MissingArtifactError("method " + to_string(cfg.method) +
                                 " requires a teacher checkpoint store");
    if (in.store->dataset_fingerprint != in.train->fingerprint)
      throw DataError("teacher store was trained on a different dataset (fingerprint mismatch)");
    if ((cfg.method == Method::cd || is_scheduled(cfg.method)) &&
        in.store->size() != cfg.n_phases)
      throw ConfigError("method " + to_string(cfg.method) + " needs exactly n_phases=" +
                        std::to_string(cfg.n_phases) + " checkpoints, store has " +
                        std::to_string(in.store->size()));
  }
  if (cfg.method == Method::scd_aw && in.student_sft_ref == nullptr)
    throw MissingArtifactError("scd_aw requires the frozen student SFT reference model");
  if (is_scheduled(cfg.method) && in.sched_eval == nullptr)
    throw ConfigError("scheduled methods require a schedule-eval view");

  RunResult result;
  result.log.method = to_string(cfg.method);
  result.log.seed = cfg.seed;

  MlpModel student =
      cfg.init_from == InitFrom::scratch ? *in.student_init : *in.student_sft_ref;

  CandidateTables candidates;
  if (is_scheduled(cfg.method)) candidates = make_candidate_tables(*in.store, *in.sched_eval);

  std::map<int, AwTable> aw_cache;  // keyed by teacher checkpoint id
  Rng batch_rng = Rng::stream(cfg.seed, "distill/batches");
  const int64_t total = cfg.total_steps();
  const LrSchedule phase_schedule{cfg.peak_lr, cfg.steps_per_phase, cfg.warmup_ratio};
  ClampStats clamp;

  std::vector<int> batch(cfg.batch_size);
  auto evaluate = [&](int64_t gstep) {
    EvalRecord ev;
    ev.step = gstep;
    ev.test_metric = row_accuracy(student, *in.test);
    ev.test_ce = mean_sample_ce(student, *in.test);
    result.log.evals.push_back(ev);
    if (result.log.best_step < 0 || ev.test_metric > result.log.best_metric) {
      result.log.best_metric = ev.test_metric;
      result.log.best_step = gstep;
      result.best_student = student;
    }
  };

  for (int phase = 1; phase <= cfg.n_phases; ++phase) {
    const int64_t phase_start = static_cast<int64_t>(phase - 1) * cfg.steps_per_phase;

    TeacherContext ctx;
    switch (cfg.method) {
      case Method::sft_only:
        break;
      case Method::td:
      case Method::rkl:
      case Method::taid:
        ctx.teacher_id = in.store->best_id;
        break;
      case Method::cd:
        ctx.teacher_id = progressive_id(cfg.n_phases, cfg.steps_per_phase, phase_start);
        break;
      case Method::scd:
      case Method::scd_aw: {
        ScheduleDecision d =
            select_checkpoint(candidates, prob_table(student, *in.sched_eval), phase);
        ctx.teacher_id = d.chosen_id;
        result.log.decisions.push_back(std::move(d));
        break;
      }
    }
    if (ctx.teacher_id > 0) ctx.teacher = &in.store->by_id(ctx.teacher_id).model;
    if (cfg.method == Method::scd_aw) {
      auto it = aw_cache.find(ctx.teacher_id);
      if (it == aw_cache.end()) {
        AwTable t = compute_aw_table(*in.student_sft_ref, *ctx.teacher, *in.train, 0,
                                     ctx.teacher_id);
        it = aw_cache.emplace(ctx.teacher_id, std::move(t)).first;
      }
      ctx.aw = &it->second;
    }
    result.log.phase_teacher_ids.push_back(ctx.teacher_id);

    OptimState opt =
        make_adamw(student, cfg.weight_decay, cfg.grad_clip_norm, cfg.beta1, cfg.beta2);
    if (observer) observer->on_phase_start(phase, ctx.teacher_id, opt, student);

    for (int64_t t = 0; t < cfg.steps_per_phase; ++t) {
      const int64_t gstep = phase_start + t;
      for (int& idx : batch)
        idx = static_cast<int>(batch_rng.uniform_int(0, in.train->n_samples - 1));
      if (observer) observer->on_step(gstep, batch);

      ctx.taid_t = total > 1 ? static_cast<double>(gstep) / static_cast<double>(total - 1) : 1.0;
      StepRecord rec = distill_step(cfg.method, cfg.alpha, *in.train, batch, student, opt,
                                    lr_at(phase_schedule, t), ctx, &clamp);
      rec.step = gstep;
      rec.phase = phase;
      result.log.steps.push_back(rec);

      if ((gstep + 1) % cfg.eval_every == 0 || gstep + 1 == total) evaluate(gstep + 1);
    }
  }

  result.final_student = student;
  result.log.final_metric = result.log.evals.back().test_metric;
  result.log.final_ce = result.log.evals.back().test_ce;
  result.log.clamp_events = clamp.clamped;
  return result;
}

/// Serializes a run log as one JSON object per line, in event order.
inline void write_run_log_jsonl(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  json start = {{"event", "run_start"}, {"method", log.method}, {"seed", log.seed}};
  out << start.dump() << "\n";

  size_t decision_idx = 0;
  size_t eval_idx = 0;
  int current_phase = 0;
  for (const auto& s : log.steps) {
    if (s.phase != current_phase) {
      current_phase = s.phase;
      json ph = {{"event", "phase_start"},
                 {"phase", s.phase},
                 {"teacher_id", log.phase_teacher_ids[s.phase - 1]}};
      if (decision_idx < log.decisions.size() &&
          log.decisions[decision_idx].phase == s.phase) {
        const auto& d = log.decisions[decision_idx++];
        ph["metric1"] = d.metric1;
        ph["metric2"] = d.metric2;
        ph["total"] = d.total;
      }
      out << ph.dump() << "\n";
    }
    json step = {{"event", "step"},       {"step", s.step},
                 {"phase", s.phase},      {"teacher_id", s.teacher_id},
                 {"loss", s.loss},        {"distill", s.distill_term},
                 {"ce", s.ce_term},       {"lr", s.lr}};
    out << step.dump() << "\n";
    while (eval_idx < log.evals.size() && log.evals[eval_idx].step == s.step + 1) {
      const auto& ev = log.evals[eval_idx++];
      json e = {{"event", "eval"},
                {"step", ev.step},
                {"test_metric", ev.test_metric},
                {"test_ce", ev.test_ce}};
      out << e.dump() << "\n";
    }
  }
  json end = {{"event", "run_end"},
              {"best_metric", log.best_metric},
              {"best_step", log.best_step},
              {"final_metric", log.final_metric},
              {"final_ce", log.final_ce},
              {"clamp_events", log.clamp_events}};
  out << end.dump() << "\n";
}

/// Frozen subset view over the first n samples, for schedule evaluation.
inline SupervisedView subset_view(const SupervisedView& view, int n_samples) {
  if (n_samples <= 0) throw ConfigError("subset_view: n_samples must be > 0");
  n_samples = std::min(n_samples, view.n_samples);
  SupervisedView v;
  v.input_dim = view.input_dim;
  v.n_classes = view.n_classes;
  v.n_samples = n_samples;
  v.sample_offset.assign(view.sample_offset.begin(),
                         view.sample_offset.begin() + n_samples + 1);
  const int rows = v.sample_offset.back();
  v.inputs.assign(view.inputs.begin(),
                  view.inputs.begin() + static_cast<size_t>(rows) * view.input_dim);
  v.targets.assign(view.targets.begin(), view.targets.begin() + rows);
  Fnv1a h;
  h.update_str("subset");
  h.update_u64(view.fingerprint);
  h.update_i64(n_samples);
  v.fingerprint = h.digest();
  return v;
}

}  // namespace distillab
