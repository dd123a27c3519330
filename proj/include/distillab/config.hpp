// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distillab/checkpoints.hpp"
#include "distillab/common.hpp"
#include "distillab/distill.hpp"
#include "distillab/mlp.hpp"
#include "distillab/rng.hpp"
#include "distillab/tasks.hpp"

namespace distillab {

/// Decorrelated seed for a named pipeline stage under one run seed.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
  Fnv1a h;
  h.update_u64(seed);
  h.update_str(tag);
  return splitmix64(h.digest());
}

struct TaskConfig {
  std::string name;  // "sine" | "reverse_copy"
  int n_train = 0;
  int n_test = 0;
  int vocab = 16;     // reverse_copy only
  int k_prefix = 6;   // reverse_copy only
};

struct ModelSpec {
  std::vector<int> hidden;
  Activation activation = Activation::relu;
};

/// Fully validated experiment description. `distill` holds the base settings;
/// per-method patches live in `method_overrides` and are applied by
/// resolve_distill_config.
struct ExperimentConfig {
  TaskConfig task;
  ModelSpec teacher;
  ModelSpec student;
  SftConfig sft_teacher;
  SftConfig sft_student;
  DistillConfig distill;  // method/seed fields are placeholders here
  std::map<std::string, json> method_overrides;
  std::vector<std::string> methods;
  std::vector<uint64_t> seeds;
  std::string out_root = "runs";
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at " + path + ": " + what);
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) config_fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed)
      if (key == a) ok = true;
    if (!ok) config_fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

inline const json& require(const json& obj, const std::string& path, std::string_view key) {
  auto it = obj.find(key);
  if (it == obj.end())
    config_fail(path.empty() ? std::string(key) : path + "." + std::string(key),
                "missing required field");
  return *it;
}

template <typename T>
inline T get_or(const json& obj, const std::string& path, std::string_view key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    config_fail(path + "." + std::string(key), e.what());
  }
}

template <typename T>
inline T get_req(const json& obj, const std::string& path, std::string_view key) {
  const json& v = require(obj, path, key);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    config_fail(path + "." + std::string(key), e.what());
  }
}

inline SftConfig parse_sft(const json& obj, const std::string& path, const SftConfig& base) {
  check_keys(obj, path,
             {"total_steps", "batch_size", "peak_lr", "warmup_ratio", "weight_decay",
              "grad_clip_norm", "beta1", "beta2", "n_checkpoints"});
  SftConfig c = base;
  c.total_steps = get_or<int64_t>(obj, path, "total_steps", c.total_steps);
  c.batch_size = get_or<int>(obj, path, "batch_size", c.batch_size);
  c.peak_lr = get_or<double>(obj, path, "peak_lr", c.peak_lr);
  c.warmup_ratio = get_or<double>(obj, path, "warmup_ratio", c.warmup_ratio);
  c.weight_decay = get_or<double>(obj, path, "weight_decay", c.weight_decay);
  c.grad_clip_norm = get_or<double>(obj, path, "grad_clip_norm", c.grad_clip_norm);
  c.beta1 = get_or<double>(obj, path, "beta1", c.beta1);
  c.beta2 = get_or<double>(obj, path, "beta2", c.beta2);
  c.n_checkpoints = get_or<int>(obj, path, "n_checkpoints", c.n_checkpoints);
  if (c.total_steps < 1) config_fail(path + ".total_steps", "must be >= 1");
  if (c.n_checkpoints < 2) config_fail(path + ".n_checkpoints", "must be >= 2");
  return c;
}

inline void apply_distill_patch(DistillConfig& c, const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"alpha", "n_phases", "steps_per_phase", "batch_size", "peak_lr", "warmup_ratio",
              "weight_decay", "grad_clip_norm", "beta1", "beta2", "eval_every",
              "schedule_eval_samples", "init_from", "taid_schedule", "overrides"});
  c.alpha = get_or<double>(obj, path, "alpha", c.alpha);
  c.n_phases = get_or<int>(obj, path, "n_phases", c.n_phases);
  c.steps_per_phase = get_or<int64_t>(obj, path, "steps_per_phase", c.steps_per_phase);
  c.batch_size = get_or<int>(obj, path, "batch_size", c.batch_size);
  c.peak_lr = get_or<double>(obj, path, "peak_lr", c.peak_lr);
  c.warmup_ratio = get_or<double>(obj, path, "warmup_ratio", c.warmup_ratio);
  c.weight_decay = get_or<double>(obj, path, "weight_decay", c.weight_decay);
  c.grad_clip_norm = get_or<double>(obj, path, "grad_clip_norm", c.grad_clip_norm);
  c.beta1 = get_or<double>(obj, path, "beta1", c.beta1);
  c.beta2 = get_or<double>(obj, path, "beta2", c.beta2);
  c.eval_every = get_or<int64_t>(obj, path, "eval_every", c.eval_every);
  c.schedule_eval_samples = get_or<int>(obj, path, "schedule_eval_samples",
                                        c.schedule_eval_samples);
  const std::string init = get_or<std::string>(
      obj, path, "init_from", c.init_from == InitFrom::scratch ? "scratch" : "student_sft");
  if (init == "scratch") c.init_from = InitFrom::scratch;
  else if (init == "student_sft") c.init_from = InitFrom::student_sft;
  else config_fail(path + ".init_from", "expected scratch|student_sft");
  const std::string tsched = get_or<std::string>(obj, path, "taid_schedule", "linear");
  if (tsched != "linear") config_fail(path + ".taid_schedule", "only 'linear' is supported");
  if (c.alpha < 0.0 || c.alpha > 1.0) config_fail(path + ".alpha", "must be in [0,1]");
  if (c.n_phases < 1) config_fail(path + ".n_phases", "must be >= 1");
  if (c.steps_per_phase < 1) config_fail(path + ".steps_per_phase", "must be >= 1");
  if (c.eval_every < 1) config_fail(path + ".eval_every", "must be >= 1");
  if (c.schedule_eval_samples < 1) config_fail(path + ".schedule_eval_samples", "must be >= 1");
}

inline ModelSpec parse_model(const json& obj, const std::string& path) {
  check_keys(obj, path, {"hidden", "activation"});
  ModelSpec spec;
  spec.hidden = get_req<std::vector<int>>(obj, path, "hidden");
  if (spec.hidden.empty()) config_fail(path + ".hidden", "needs at least one hidden layer size");
  for (int h : spec.hidden)
    if (h < 1) config_fail(path + ".hidden", "layer sizes must be positive");
  spec.activation = activation_from_string(get_or<std::string>(obj, path, "activation", "relu"));
  return spec;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& root) {
  using detail::check_keys;
  using detail::config_fail;
  using detail::get_or;
  using detail::get_req;

  check_keys(root, "",
             {"task", "teacher", "student", "sft", "distill", "methods", "seeds", "out_root"});

  ExperimentConfig cfg;

  const json& task = detail::require(root, "", "task");
  check_keys(task, "task", {"name", "n_train", "n_test", "vocab", "k_prefix"});
  cfg.task.name = get_req<std::string>(task, "task", "name");
  if (cfg.task.name == "sine") {
    cfg.task.n_train = get_or<int>(task, "task", "n_train", 1000);
    cfg.task.n_test = get_or<int>(task, "task", "n_test", 1000);
    if (task.contains("vocab") || task.contains("k_prefix"))
      config_fail("task", "vocab/k_prefix apply only to reverse_copy");
  } else if (cfg.task.name == "reverse_copy") {
    cfg.task.n_train = get_or<int>(task, "task", "n_train", 2000);
    cfg.task.n_test = get_or<int>(task, "task", "n_test", 500);
    cfg.task.vocab = get_or<int>(task, "task", "vocab", 16);
    cfg.task.k_prefix = get_or<int>(task, "task", "k_prefix", 6);
  } else {
    config_fail("task.name", "expected sine|reverse_copy");
  }
  if (cfg.task.n_train < 1 || cfg.task.n_test < 1)
    config_fail("task", "n_train and n_test must be >= 1");

  cfg.teacher = detail::parse_model(detail::require(root, "", "teacher"), "teacher");
  cfg.student = detail::parse_model(detail::require(root, "", "student"), "student");

  SftConfig sft_defaults;
  if (root.contains("sft")) {
    const json& sft = root.at("sft");
    check_keys(sft, "sft", {"teacher", "student"});
    cfg.sft_teacher = sft.contains("teacher")
                          ? detail::parse_sft(sft.at("teacher"), "sft.teacher", sft_defaults)
                          : sft_defaults;
    cfg.sft_student = sft.contains("student")
                          ? detail::parse_sft(sft.at("student"), "sft.student", sft_defaults)
                          : sft_defaults;
  } else {
    cfg.sft_teacher = sft_defaults;
    cfg.sft_student = sft_defaults;
  }

  cfg.distill = DistillConfig{};
  if (root.contains("distill")) {
    detail::apply_distill_patch(cfg.distill, root.at("distill"), "distill");
    if (root.at("distill").contains("overrides")) {
      const json& ov = root.at("distill").at("overrides");
      if (!ov.is_object()) config_fail("distill.overrides", "expected an object");
      for (const auto& [name, patch] : ov.items()) {
        method_from_string(name);  // rejects unknown method names
        DistillConfig probe = cfg.distill;
        detail::apply_distill_patch(probe, patch, "distill.overrides." + name);
        if (patch.contains("overrides"))
          config_fail("distill.overrides." + name, "overrides cannot nest");
        cfg.method_overrides[name] = patch;
      }
    }
  }

  cfg.methods = get_or<std::vector<std::string>>(
      root, "", "methods", {"sft_only", "td", "rkl", "taid", "cd", "scd", "scd_aw"});
  if (cfg.methods.empty()) config_fail("methods", "must not be empty");
  for (const auto& m : cfg.methods) method_from_string(m);

  cfg.seeds = get_or<std::vector<uint64_t>>(root, "", "seeds", {0, 1, 2, 3, 4});
  if (cfg.seeds.empty()) config_fail("seeds", "must not be empty");

  cfg.out_root = get_or<std::string>(root, "", "out_root", "runs");
  return cfg;
}

namespace detail {

inline json sft_to_json(const SftConfig& c) {
  return {{"total_steps", c.total_steps},
          {"batch_size", c.batch_size},
          {"peak_lr", c.peak_lr},
          {"warmup_ratio", c.warmup_ratio},
          {"weight_decay", c.weight_decay},
          {"grad_clip_norm", c.grad_clip_norm},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"n_checkpoints", c.n_checkpoints}};
}

inline json distill_to_json(const DistillConfig& c) {
  return {{"alpha", c.alpha},
          {"n_phases", c.n_phases},
          {"steps_per_phase", c.steps_per_phase},
          {"batch_size", c.batch_size},
          {"peak_lr", c.peak_lr},
          {"warmup_ratio", c.warmup_ratio},
          {"weight_decay", c.weight_decay},
          {"grad_clip_norm", c.grad_clip_norm},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eval_every", c.eval_every},
          {"schedule_eval_samples", c.schedule_eval_samples},
          {"init_from", c.init_from == InitFrom::scratch ? "scratch" : "student_sft"},
          {"taid_schedule", "linear"}};
}

}  // namespace detail

/// Canonical resolved form: every default materialized, keys in fixed order.
/// This is what gets hashed and written into run directories.
inline json resolved_json(const ExperimentConfig& cfg) {
  json task = {{"name", cfg.task.name},
               {"n_train", cfg.task.n_train},
               {"n_test", cfg.task.n_test}};
  if (cfg.task.name == "reverse_copy") {
    task["vocab"] = cfg.task.vocab;
    task["k_prefix"] = cfg.task.k_prefix;
  }
  json distill = detail::distill_to_json(cfg.distill);
  json overrides = json::object();
  for (const auto& [name, patch] : cfg.method_overrides) overrides[name] = patch;
  distill["overrides"] = std::move(overrides);
  return {{"task", std::move(task)},
          {"teacher",
           {{"hidden", cfg.teacher.hidden}, {"activation", to_string(cfg.teacher.activation)}}},
          {"student",
           {{"hidden", cfg.student.hidden}, {"activation", to_string(cfg.student.activation)}}},
          {"sft",
           {{"teacher", detail::sft_to_json(cfg.sft_teacher)},
            {"student", detail::sft_to_json(cfg.sft_student)}}},
          {"distill", std::move(distill)},
          {"methods", cfg.methods},
          {"seeds", cfg.seeds},
          {"out_root", cfg.out_root}};
}

inline std::string config_hash(const json& resolved) {
  Fnv1a h;
  h.update_str(resolved.dump());
  return hex64(h.digest());
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(root);
}

/// Distill settings for one (method, seed) cell: base config, then the
/// method's override patch, then the method/seed themselves.
inline DistillConfig resolve_distill_config(const ExperimentConfig& cfg, Method method,
                                            uint64_t seed) {
  DistillConfig c = cfg.distill;
  auto it = cfg.method_overrides.find(to_string(method));
  if (it != cfg.method_overrides.end())
    detail::apply_distill_patch(c, it->second, "distill.overrides." + to_string(method));
  c.method = method;
  c.seed = derive_seed(seed, "distill");
  return c;
}

inline std::vector<int> full_layer_sizes(const ModelSpec& spec, int input_dim, int n_classes) {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
  sizes.push_back(n_classes);
  return sizes;
}

// ---------------------------------------------------------------------------
// Output layout and run manifests.
// ---------------------------------------------------------------------------

inline std::filesystem::path task_dir(const std::filesystem::path& root,
                                      const std::string& task) {
  return root / task;
}

inline std::filesystem::path sft_dir(const std::filesystem::path& root, const std::string& task,
                                     uint64_t seed) {
  return root / task / "sft" / std::to_string(seed);
}

inline std::filesystem::path run_dir(const std::filesystem::path& root, const std::string& task,
                                     const std::string& method, uint64_t seed) {
  return root / task / method / std::to_string(seed);
}

/// One per output directory; records what produced it and per-stage status.
struct RunManifest {
  std::string config_hash;
  std::string inputs_hash;
  std::string tool_version = std::string(kToolVersion);
  std::string started_at;
  std::string finished_at;
  std::map<std::string, std::string> stage_status;  // e.g. {"sft": "ok"}
};

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_run_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  json j = {{"schema", "runmanifest/1"},
            {"config_hash", m.config_hash},
            {"inputs_hash", m.inputs_hash},
            {"tool_version", m.tool_version},
            {"started_at", m.started_at},
            {"finished_at", m.finished_at},
            {"stages", m.stage_status}};
  detail::write_text(dir / "run_manifest.json", j.dump(2) + "\n");
}

inline RunManifest read_run_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "run_manifest.json";
  const auto bytes = detail::read_file(path);
  json j = json::parse(bytes.begin(), bytes.end());
  if (j.at("schema").get<std::string>() != "runmanifest/1")
    throw IoError("unsupported run manifest schema in " + path.string());
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.inputs_hash = j.at("inputs_hash").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  m.stage_status = j.at("stages").get<std::map<std::string, std::string>>();
  return m;
}

/// Idempotence guard: a completed directory with the same config hash is not
/// redone unless forced. Returns true when the stage should run.
inline bool should_run(const std::filesystem::path& dir, const std::string& config_hash,
                       bool force) {
  if (force) return true;
  if (!std::filesystem::exists(dir / "run_manifest.json")) return true;
  const RunManifest existing = read_run_manifest(dir);
  if (existing.config_hash != config_hash) return true;
  return false;
}

}  // namespace distillab
