// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "distillab/analysis.hpp"
#include "distillab/aw.hpp"
#include "distillab/checkpoints.hpp"
#include "distillab/config.hpp"
#include "distillab/distill.hpp"
#include "distillab/tasks.hpp"

namespace distillab {

struct TaskData {
  SupervisedView train;
  SupervisedView test;
};

/// Regenerates the task deterministically from (config, seed). Every stage
/// calls this rather than reading datasets from disk; the fingerprint ties
/// artifacts together.
inline TaskData make_task_data(const TaskConfig& t, uint64_t seed) {
  TaskData d;
  if (t.name == "sine") {
    auto [train, test] = gen_sine(seed, t.n_train, t.n_test);
    d.train = make_view(train);
    d.test = make_view(test);
  } else if (t.name == "reverse_copy") {
    auto [train, test] = gen_reverse_copy(seed, t.vocab, t.k_prefix, t.n_train, t.n_test);
    d.train = make_view(train);
    d.test = make_view(test);
  } else {
    throw ConfigError("unknown task '" + t.name + "'");
  }
  return d;
}

enum class RerunPolicy { refuse, skip };

namespace detail {

// Fails or skips when the directory already holds a completed stage with the
// same config hash. Returns true when the stage should proceed.
inline bool rerun_gate(const std::filesystem::path& dir, const std::string& hash, bool force,
                       RerunPolicy policy) {
  if (should_run(dir, hash, force)) return true;
  if (policy == RerunPolicy::refuse)
    throw ConfigError(dir.string() +
                      " already contains a completed run with this config; pass --force to redo");
  return false;
}

inline void hash_file_into(Fnv1a& h, const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  h.update(bytes.data(), bytes.size());
}

}  // namespace detail

struct SftStageResult {
  bool skipped = false;
  std::filesystem::path dir;
  CheckpointStore teacher;
  CheckpointStore student;
};

/// Trains teacher and student SFT stores for one seed and writes them under
/// <root>/<task>/sft/<seed>/.
inline SftStageResult run_sft_stage(const ExperimentConfig& cfg, uint64_t seed,
                                    const std::filesystem::path& root, bool force,
                                    RerunPolicy policy = RerunPolicy::refuse) {
  const json resolved = resolved_json(cfg);
  const std::string hash = config_hash(resolved);
  SftStageResult out;
  out.dir = sft_dir(root, cfg.task.name, seed);

  if (!detail::rerun_gate(out.dir, hash, force, policy)) {
    out.skipped = true;
    out.teacher = load_store(out.dir / "teacher_store");
    out.student = load_store(out.dir / "student_store");
    return out;
  }

  RunManifest manifest;
  manifest.config_hash = hash;
  manifest.started_at = utc_timestamp();

  const TaskData data = make_task_data(cfg.task, seed);
  Fnv1a inputs;
  inputs.update_u64(data.train.fingerprint);
  inputs.update_u64(data.test.fingerprint);
  manifest.inputs_hash = hex64(inputs.digest());

  auto train_one = [&](const ModelSpec& spec, SftConfig sft, std::string_view role) {
    const MlpModel init =
        init_model(full_layer_sizes(spec, data.train.input_dim, data.train.n_classes),
                   spec.activation, derive_seed(seed, std::string(role) + "_init"));
    sft.seed = derive_seed(seed, std::string(role) + "_sft");
    return train_sft(init, data.train, data.test, sft);
  };

  out.teacher = train_one(cfg.teacher, cfg.sft_teacher, "teacher");
  out.student = train_one(cfg.student, cfg.sft_student, "student");

  std::filesystem::create_directories(out.dir);
  save_store(out.teacher, out.dir / "teacher_store");
  save_store(out.student, out.dir / "student_store");
  detail::write_text(out.dir / "config.resolved.json", resolved.dump(2) + "\n");

  manifest.finished_at = utc_timestamp();
  manifest.stage_status["sft"] =
      out.teacher.status == "ok" && out.student.status == "ok" ? "ok" : "diverged";
  write_run_manifest(manifest, out.dir);
  return out;
}

struct DistillStageResult {
  bool skipped = false;
  std::filesystem::path dir;
  RunLog log;
};

/// Runs one (method, seed) cell against the stores produced by the sft stage
/// and writes artifacts under <root>/<task>/<method>/<seed>/.
inline DistillStageResult run_distill_stage(const ExperimentConfig& cfg, Method method,
                                            uint64_t seed, const std::filesystem::path& root,
                                            bool force,
                                            RerunPolicy policy = RerunPolicy::refuse) {
  const json resolved = resolved_json(cfg);
  const std::string hash = config_hash(resolved);
  DistillStageResult out;
  out.dir = run_dir(root, cfg.task.name, to_string(method), seed);

  if (!detail::rerun_gate(out.dir, hash, force, policy)) {
    out.skipped = true;
    return out;
  }

  RunManifest manifest;
  manifest.config_hash = hash;
  manifest.started_at = utc_timestamp();

  const TaskData data = make_task_data(cfg.task, seed);
  const std::filesystem::path sft = sft_dir(root, cfg.task.name, seed);

  Fnv1a inputs;
  inputs.update_u64(data.train.fingerprint);
  inputs.update_u64(data.test.fingerprint);

  CheckpointStore teacher_store;
  if (needs_store(method)) {
    const auto store_dir = sft / "teacher_store";
    if (!std::filesystem::exists(store_dir / "manifest.json"))
      throw MissingArtifactError("teacher checkpoint store not found at " + store_dir.string() +
                                 "; run the sft stage first");
    teacher_store = load_store(store_dir);
    detail::hash_file_into(inputs, store_dir / "manifest.json");
  }

  const DistillConfig dcfg = resolve_distill_config(cfg, method, seed);

  CheckpointStore student_store;
  const bool needs_student_ref =
      method == Method::scd_aw || dcfg.init_from == InitFrom::student_sft;
  if (needs_student_ref) {
    const auto store_dir = sft / "student_store";
    if (!std::filesystem::exists(store_dir / "manifest.json"))
      throw MissingArtifactError("student SFT reference store not found at " +
                                 store_dir.string() + "; run the sft stage first");
    student_store = load_store(store_dir);
    detail::hash_file_into(inputs, store_dir / "manifest.json");
  }
  manifest.inputs_hash = hex64(inputs.digest());

  const MlpModel student_init =
      init_model(full_layer_sizes(cfg.student, data.train.input_dim, data.train.n_classes),
                 cfg.student.activation, derive_seed(seed, "student_init"));

  SupervisedView sched_eval;
  DistillInputs in;
  in.train = &data.train;
  in.test = &data.test;
  in.student_init = &student_init;
  if (needs_store(method)) in.store = &teacher_store;
  if (needs_student_ref) in.student_sft_ref = &student_store.best().model;
  if (is_scheduled(method)) {
    sched_eval = subset_view(data.test, dcfg.schedule_eval_samples);
    in.sched_eval = &sched_eval;
  }

  const RunResult result = run(dcfg, in);
  out.log = result.log;

  std::filesystem::create_directories(out.dir);
  detail::write_text(out.dir / "config.resolved.json", resolved.dump(2) + "\n");
  write_run_log_jsonl(result.log, out.dir / "run_log.jsonl");

  const json meta = {{"method", to_string(method)},
                     {"seed", seed},
                     {"best_metric", result.log.best_metric},
                     {"best_step", result.log.best_step},
                     {"final_metric", result.log.final_metric},
                     {"final_ce", result.log.final_ce}};
  save_model(result.final_student, out.dir / "final_student", meta);
  save_model(result.best_student, out.dir / "best_student", meta);

  if (!result.log.decisions.empty())
    schedule_trace_csv(result.log.decisions, out.dir / "schedule.csv");
  if (method == Method::scd_aw) {
    const AwTable table =
        compute_aw_table(student_store.best().model, teacher_store.best().model, data.train,
                         student_store.best_id, teacher_store.best_id);
    aw_table_csv(table, out.dir / "aw_table.csv");
  }

  manifest.finished_at = utc_timestamp();
  manifest.stage_status["distill"] = "ok";
  write_run_manifest(manifest, out.dir);
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of empty set");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {

struct RunEndRecord {
  double best_metric = 0.0;
  double final_metric = 0.0;
};

// The run_end event is the last line of a well-formed run log.
inline std::optional<RunEndRecord> read_run_end(const std::filesystem::path& run_log) {
  std::ifstream in(run_log);
  if (!in) return std::nullopt;
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  if (last.empty()) return std::nullopt;
  const json j = json::parse(last, nullptr, false);
  if (j.is_discarded() || j.value("event", "") != "run_end") return std::nullopt;
  RunEndRecord r;
  r.best_metric = j.at("best_metric").get<double>();
  r.final_metric = j.at("final_metric").get<double>();
  return r;
}

}  // namespace detail

/// Aggregates run logs into <root>/<task>/summary.csv (one row per method,
/// seed-median of the best test metric) and writes per-run analysis files.
/// Missing or partial runs are flagged in the summary, never fatal.
inline void run_report(const ExperimentConfig& cfg, const std::filesystem::path& root,
                       std::ostream& log) {
  const std::filesystem::path tdir = task_dir(root, cfg.task.name);
  std::filesystem::create_directories(tdir);
  std::ofstream summary(tdir / "summary.csv");
  if (!summary) throw IoError("cannot open " + (tdir / "summary.csv").string() + " for writing");
  summary << "task,method,status,n_seeds,median_best_metric,median_final_metric\n";

  char buf[64];
  for (const auto& method_name : cfg.methods) {
    std::vector<double> best, final_;
    for (uint64_t seed : cfg.seeds) {
      const auto dir = run_dir(root, cfg.task.name, method_name, seed);
      const auto end = detail::read_run_end(dir / "run_log.jsonl");
      if (!end) {
        log << "warning: no completed run at " << dir.string() << "\n";
        continue;
      }
      best.push_back(end->best_metric);
      final_.push_back(end->final_metric);
    }
    std::string status = "ok";
    if (best.empty()) status = "missing";
    else if (best.size() < cfg.seeds.size())
      status = "partial(" + std::to_string(best.size()) + "/" +
               std::to_string(cfg.seeds.size()) + ")";
    summary << cfg.task.name << ',' << method_name << ',' << status << ',' << best.size() << ',';
    if (!best.empty()) {
      std::snprintf(buf, sizeof buf, "%.12g,", median(best));
      summary << buf;
      std::snprintf(buf, sizeof buf, "%.12g", median(final_));
      summary << buf;
    } else {
      summary << ',';
    }
    summary << '\n';
  }
  summary.close();

  // Per-run diagnostics need the teacher store and the run's best student.
  for (const auto& method_name : cfg.methods) {
    for (uint64_t seed : cfg.seeds) {
      const auto dir = run_dir(root, cfg.task.name, method_name, seed);
      if (!std::filesystem::exists(dir / "best_student" / "manifest.json")) continue;
      const auto teacher_dir = sft_dir(root, cfg.task.name, seed) / "teacher_store";
      if (!std::filesystem::exists(teacher_dir / "manifest.json")) {
        log << "warning: skipping diagnostics for " << dir.string()
            << " (no teacher store for seed " << seed << ")\n";
        continue;
      }
      const TaskData data = make_task_data(cfg.task, seed);
      const CheckpointStore teacher_store = load_store(teacher_dir);
      const MlpModel student = load_model(dir / "best_student");

      const RiskReport report = partition(student, teacher_store.best().model, data.test);
      sorted_diff_csv(report, dir / "sorted_diff.csv");
      const SurpassDiagnostic diag = surpass_diagnostic(report);
      const json surpass = {
          {"risk_mode", to_string(report.risk_mode)},
          {"risk_definition", "per-sample sequence-summed cross-entropy on the test split"},
          {"student_surpasses", diag.student_surpasses},
          {"margin", diag.margin},
          {"sfs_advantage", report.sfs_advantage},
          {"tfs_deficit", report.tfs_deficit},
          {"total", report.total},
          {"n_sfs", report.n_sfs()},
          {"n_tfs", report.n_tfs()},
          {"note", "theoretical bound terms are not computable; the empirical tfs_deficit "
                   "stands in for them"}};
      detail::write_text(dir / "surpass.json", surpass.dump(2) + "\n");

      if (std::filesystem::exists(dir / "aw_table.csv")) {
        const auto student_dir = sft_dir(root, cfg.task.name, seed) / "student_store";
        if (std::filesystem::exists(student_dir / "manifest.json")) {
          const CheckpointStore student_store = load_store(student_dir);
          const AwTable table =
              compute_aw_table(student_store.best().model, teacher_store.best().model,
                               data.train, student_store.best_id, teacher_store.best_id);
          aw_histogram_csv(table, 20, dir / "aw_hist.csv");
        }
      }
      log << "report: wrote diagnostics for " << dir.string() << "\n";
    }
  }
}

}  // namespace distillab
