// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distillab/common.hpp"
#include "distillab/losses.hpp"
#include "distillab/mlp.hpp"
#include "distillab/optim.hpp"
#include "distillab/rng.hpp"
#include "distillab/tasks.hpp"

namespace distillab {

using json = nlohmann::ordered_json;

/// Teacher (or student) snapshot taken at a fixed SFT step, with held-out
/// metrics from the frozen validation split.
struct Checkpoint {
  MlpModel model;
  int64_t step = 0;
  double epoch = 0.0;
  double val_risk = 0.0;      // mean held-out sequence-summed CE
  double val_accuracy = 0.0;  // held-out per-position accuracy
  int id = 0;                 // 1..N
};

struct CheckpointStore {
  std::vector<Checkpoint> checkpoints;  // ordered by id, last one is the final model
  uint64_t dataset_fingerprint = 0;
  json training_config = json::object();
  int best_id = 0;
  std::string status = "ok";  // "ok" | "diverged"

  int size() const { return static_cast<int>(checkpoints.size()); }
  const Checkpoint& by_id(int id) const {
    if (id < 1 || id > size()) throw DataError("checkpoint id out of range: " + std::to_string(id));
    return checkpoints[id - 1];
  }
  const Checkpoint& best() const { return by_id(best_id); }
  const Checkpoint& final() const { return checkpoints.back(); }
};

/// Argmin of val_risk; ties resolve toward the later checkpoint.
inline int select_best(const CheckpointStore& store) {
  if (store.checkpoints.empty()) throw DataError("select_best: empty store");
  int best = 1;
  for (int id = 2; id <= store.size(); ++id)
    if (store.by_id(id).val_risk <= store.by_id(best).val_risk) best = id;
  return best;
}

struct SftConfig {
  int64_t total_steps = 1000;
  int batch_size = 32;
  double peak_lr = 3e-3;
  double warmup_ratio = 0.1;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int n_checkpoints = 8;
  uint64_t seed = 0;
};

namespace detail {

// Mean over batch samples of sequence-summed CE, with the matching gradient
// applied through the model.
inline double sft_step_loss_and_grad(const MlpModel& model, const SupervisedView& view,
                                     std::span<const int> batch, ParamGrads& grads,
                                     ClampStats* stats) {
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (int sample : batch) {
    for (int r = view.sample_offset[sample]; r < view.sample_offset[sample + 1]; ++r) {
      const auto cache = forward_cached(model, view.input_row(r));
      const auto q = softmax(cache.back());
      loss += cross_entropy(view.targets[r], q, stats);
      backward_accumulate(model, cache, grad_ce_wrt_logits(q, view.targets[r]), grads, scale);
    }
  }
  return loss * scale;
}

}  // namespace detail

/// SFT with AdamW and cosine-warmup LR, snapshotting N evenly spaced
/// checkpoints (the last at the final step). On divergence the store is
/// returned with status "diverged" and whatever checkpoints exist.
inline CheckpointStore train_sft(const MlpModel& init, const SupervisedView& train_view,
                                 const SupervisedView& val_view, const SftConfig& cfg) {
  if (cfg.n_checkpoints < 2) throw ConfigError("train_sft: n_checkpoints must be >= 2");
  if (cfg.total_steps < cfg.n_checkpoints)
    throw ConfigError("train_sft: total_steps must be >= n_checkpoints");
  if (cfg.batch_size < 1) throw ConfigError("train_sft: batch_size must be >= 1");

  CheckpointStore store;
  store.dataset_fingerprint = train_view.fingerprint;
  store.training_config = {{"total_steps", cfg.total_steps},
                           {"batch_size", cfg.batch_size},
                           {"peak_lr", cfg.peak_lr},
                           {"warmup_ratio", cfg.warmup_ratio},
                           {"weight_decay", cfg.weight_decay},
                           {"grad_clip_norm", cfg.grad_clip_norm},
                           {"n_checkpoints", cfg.n_checkpoints},
                           {"seed", cfg.seed}};

  MlpModel model = init;
  OptimState opt = make_adamw(model, cfg.weight_decay, cfg.grad_clip_norm, cfg.beta1, cfg.beta2);
  const LrSchedule schedule{cfg.peak_lr, cfg.total_steps, cfg.warmup_ratio};
  Rng batch_rng = Rng::stream(cfg.seed, "sft/batches");

  const int n = cfg.n_checkpoints;
  std::vector<int64_t> snap_steps(n);
  for (int i = 1; i <= n; ++i)
    snap_steps[i - 1] = std::llround(static_cast<double>(i) * cfg.total_steps / n);

  auto snapshot = [&](int64_t step) {
    Checkpoint ck;
    ck.model = model;
    ck.step = step;
    ck.epoch = static_cast<double>(step) * cfg.batch_size / train_view.n_samples;
    ck.val_risk = mean_sample_ce(model, val_view);
    ck.val_accuracy = row_accuracy(model, val_view);
    ck.id = static_cast<int>(store.checkpoints.size()) + 1;
    store.checkpoints.push_back(std::move(ck));
  };

  std::vector<int> batch(cfg.batch_size);
  int next_snap = 0;
  for (int64_t step = 0; step < cfg.total_steps; ++step) {
    for (int& idx : batch)
      idx = static_cast<int>(batch_rng.uniform_int(0, train_view.n_samples - 1));
    ParamGrads grads = zeros_like(model);
    double loss;
    try {
      loss = detail::sft_step_loss_and_grad(model, train_view, batch, grads, nullptr);
      if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss");
      adamw_step(model, grads, opt, lr_at(schedule, step));
    } catch (const DivergenceError&) {
      store.status = "diverged";
      break;
    } catch (const DataError&) {
      // Exploded parameters surface as non-finite logits inside softmax.
      store.status = "diverged";
      break;
    }
    try {
      while (next_snap < n && step + 1 == snap_steps[next_snap]) {
        snapshot(step + 1);
        ++next_snap;
      }
    } catch (const DataError&) {
      store.status = "diverged";
      break;
    }
  }

  if (store.size() < 2)
    throw DivergenceError("training diverged before the second checkpoint was reached");
  store.best_id = select_best(store);
  return store;
}

// ---------------------------------------------------------------------------
// On-disk container: manifest.json plus little-endian float64 payloads.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<unsigned char> encode_f64_le(std::span<const double> values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 8);
  for (double d : values) {
    const uint64_t u = std::bit_cast<uint64_t>(d);
    for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<unsigned char>(u >> (8 * k)));
  }
  return bytes;
}

inline std::vector<double> decode_f64_le(std::span<const unsigned char> bytes) {
  if (bytes.size() % 8 != 0) throw IoError("payload truncated (size not a multiple of 8)");
  std::vector<double> values(bytes.size() / 8);
  for (size_t i = 0; i < values.size(); ++i) {
    uint64_t u = 0;
    for (int k = 7; k >= 0; --k) u = (u << 8) | bytes[i * 8 + k];
    values[i] = std::bit_cast<double>(u);
  }
  return values;
}

inline void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

inline json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) throw IoError("no manifest.json in " + dir.string());
  const auto bytes = read_file(path);
  return json::parse(bytes.begin(), bytes.end());
}

inline std::vector<double> read_payload(const std::filesystem::path& dir, const json& entry) {
  const auto path = dir / entry.at("payload").get<std::string>();
  const auto bytes = read_file(path);
  if (bytes.size() != entry.at("bytes").get<uint64_t>())
    throw IoError("payload truncated: " + path.string());
  const uint32_t crc = crc32(bytes);
  if (hex64(crc) != entry.at("crc32").get<std::string>())
    throw IoError("payload checksum mismatch: " + path.string());
  return decode_f64_le(bytes);
}

inline json payload_entry(const std::filesystem::path& dir, const std::string& name,
                          std::span<const double> values) {
  const auto bytes = encode_f64_le(values);
  write_file(dir / name, bytes);
  return {{"payload", name}, {"bytes", bytes.size()}, {"crc32", hex64(crc32(bytes))}};
}

}  // namespace detail

/// Writes manifest.json plus one ckpt_<id>.f64 per checkpoint. Round trips
/// are byte-identical.
inline void save_store(const CheckpointStore& store, const std::filesystem::path& dir) {
  if (store.size() < 2) throw DataError("refusing to save a store with fewer than 2 checkpoints");
  std::filesystem::create_directories(dir);

  const auto& first = store.checkpoints.front().model;
  json manifest;
  manifest["schema"] = "ckptstore/1";
  manifest["layer_sizes"] = first.layer_sizes;
  manifest["activation"] = to_string(first.activation);
  manifest["n_checkpoints"] = store.size();
  manifest["dataset_fingerprint"] = hex64(store.dataset_fingerprint);
  manifest["training_config"] = store.training_config;
  manifest["best_id"] = store.best_id;
  manifest["status"] = store.status;

  json entries = json::array();
  for (const auto& ck : store.checkpoints) {
    json e = detail::payload_entry(dir, "ckpt_" + std::to_string(ck.id) + ".f64",
                                   flatten_params(ck.model));
    e["id"] = ck.id;
    e["step"] = ck.step;
    e["epoch"] = ck.epoch;
    e["val_risk"] = ck.val_risk;
    e["val_accuracy"] = ck.val_accuracy;
    entries.push_back(std::move(e));
  }
  manifest["checkpoints"] = std::move(entries);
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline CheckpointStore load_store(const std::filesystem::path& dir) {
  const json manifest = detail::read_manifest(dir);
  if (manifest.at("schema").get<std::string>() != "ckptstore/1")
    throw IoError("unsupported store schema: " + manifest.at("schema").get<std::string>());

  const auto layer_sizes = manifest.at("layer_sizes").get<std::vector<int>>();
  const auto activation = activation_from_string(manifest.at("activation").get<std::string>());

  CheckpointStore store;
  store.dataset_fingerprint = parse_hex64(manifest.at("dataset_fingerprint").get<std::string>());
  store.training_config = manifest.at("training_config");
  store.best_id = manifest.at("best_id").get<int>();
  store.status = manifest.at("status").get<std::string>();

  for (const auto& entry : manifest.at("checkpoints")) {
    Checkpoint ck;
    ck.model = init_model(layer_sizes, activation, 0);
    unflatten_params(ck.model, detail::read_payload(dir, entry));
    ck.id = entry.at("id").get<int>();
    ck.step = entry.at("step").get<int64_t>();
    ck.epoch = entry.at("epoch").get<double>();
    ck.val_risk = entry.at("val_risk").get<double>();
    ck.val_accuracy = entry.at("val_accuracy").get<double>();
    store.checkpoints.push_back(std::move(ck));
  }

  if (store.size() < 2) throw IoError("store has fewer than 2 checkpoints");
  if (store.size() != manifest.at("n_checkpoints").get<int>())
    throw IoError("checkpoint count does not match manifest");
  for (int i = 0; i < store.size(); ++i) {
    if (store.checkpoints[i].id != i + 1) throw IoError("checkpoint ids are not 1..N in order");
    if (i > 0 && store.checkpoints[i].step <= store.checkpoints[i - 1].step)
      throw IoError("checkpoint steps are not strictly increasing");
  }
  if (store.best_id < 1 || store.best_id > store.size())
    throw IoError("best_id outside 1..N");
  return store;
}

/// Single-model container ("model/1"), same payload codec as stores. Used
/// for distilled students, where a multi-checkpoint store does not apply.
inline void save_model(const MlpModel& model, const std::filesystem::path& dir,
                       const json& meta = json::object()) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["schema"] = "model/1";
  manifest["layer_sizes"] = model.layer_sizes;
  manifest["activation"] = to_string(model.activation);
  manifest["meta"] = meta;
  json entry = detail::payload_entry(dir, "model.f64", flatten_params(model));
  manifest["model"] = std::move(entry);
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline MlpModel load_model(const std::filesystem::path& dir) {
  const json manifest = detail::read_manifest(dir);
  if (manifest.at("schema").get<std::string>() != "model/1")
    throw IoError("unsupported model schema: " + manifest.at("schema").get<std::string>());
  MlpModel model = init_model(manifest.at("layer_sizes").get<std::vector<int>>(),
                              activation_from_string(manifest.at("activation").get<std::string>()),
                              0);
  unflatten_params(model, detail::read_payload(dir, manifest.at("model")));
  return model;
}

/// Probability tables share the container format for offline analysis.
inline void save_prob_table(const ProbTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["schema"] = "probtable/1";
  manifest["dim"] = table.dim;
  manifest["sample_offset"] = table.sample_offset;
  manifest["dataset_fingerprint"] = hex64(table.fingerprint);
  manifest["table"] = detail::payload_entry(dir, "table.f64", table.probs);
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline ProbTable load_prob_table(const std::filesystem::path& dir) {
  const json manifest = detail::read_manifest(dir);
  if (manifest.at("schema").get<std::string>() != "probtable/1")
    throw IoError("unsupported table schema: " + manifest.at("schema").get<std::string>());
  ProbTable table;
  table.dim = manifest.at("dim").get<int>();
  table.sample_offset = manifest.at("sample_offset").get<std::vector<int>>();
  table.fingerprint = parse_hex64(manifest.at("dataset_fingerprint").get<std::string>());
  table.probs = detail::read_payload(dir, manifest.at("table"));
  return table;
}

}  // namespace distillab
