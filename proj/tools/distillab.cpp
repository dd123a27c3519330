// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
//
// distillab: experiment driver for the distillation laboratory.
//
//   distillab sft     --config cfg.json [--seeds 0,1,2] [--out DIR] [--force]
//   distillab distill --config cfg.json --method scd [--seeds ...] [--out DIR] [--force]
//   distillab matrix  --config cfg.json [--seeds ...] [--out DIR] [--force]
//   distillab report  --config cfg.json [--out DIR]
//
// Exit codes: 0 ok, 2 config error, 3 missing dependency artifact,
// 4 numerical divergence.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "distillab/config.hpp"
#include "distillab/pipeline.hpp"

namespace {

using namespace distillab;

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<uint64_t> seeds;
  size_t pos = 0;
  while (pos <= csv.size()) {
    const size_t comma = std::min(csv.find(',', pos), csv.size());
    const std::string item = csv.substr(pos, comma - pos);
    if (item.empty()) throw ConfigError("--seeds: empty element in '" + csv + "'");
    try {
      size_t used = 0;
      const uint64_t v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      seeds.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--seeds: '" + item + "' is not a nonnegative integer");
    }
    pos = comma + 1;
  }
  if (seeds.empty()) throw ConfigError("--seeds: empty list");
  return seeds;
}

int worker_count(size_t n_cells) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* cap = std::getenv("DISTILL_LAB_THREADS")) {
    try {
      const unsigned c = static_cast<unsigned>(std::stoul(cap));
      if (c >= 1) n = std::min(n, c);
    } catch (const std::exception&) {
      throw ConfigError("DISTILL_LAB_THREADS must be a positive integer");
    }
  }
  return static_cast<int>(std::min<size_t>(n, n_cells));
}

struct CommonArgs {
  std::string config_path;
  std::string out_override;
  std::string seeds_csv;
  bool force = false;
};

ExperimentConfig load_and_override(const CommonArgs& args) {
  ExperimentConfig cfg = load_config_file(args.config_path);
  if (!args.out_override.empty()) cfg.out_root = args.out_override;
  if (!args.seeds_csv.empty()) cfg.seeds = parse_seed_list(args.seeds_csv);
  return cfg;
}

void cmd_sft(const CommonArgs& args) {
  const ExperimentConfig cfg = load_and_override(args);
  for (uint64_t seed : cfg.seeds) {
    const auto res = run_sft_stage(cfg, seed, cfg.out_root, args.force);
    if (res.skipped) {
      std::cout << "[sft] seed " << seed << ": up to date at " << res.dir.string() << "\n";
      continue;
    }
    std::cout << "[sft] seed " << seed << ": teacher best ckpt " << res.teacher.best_id
              << " (val acc " << res.teacher.best().val_accuracy << "), student best ckpt "
              << res.student.best_id << " (val acc " << res.student.best().val_accuracy
              << ") -> " << res.dir.string() << "\n";
  }
}

void cmd_distill(const CommonArgs& args, const std::string& method_name) {
  const ExperimentConfig cfg = load_and_override(args);
  const Method method = method_from_string(method_name);
  for (uint64_t seed : cfg.seeds) {
    const auto res = run_distill_stage(cfg, method, seed, cfg.out_root, args.force);
    if (res.skipped) {
      std::cout << "[distill] " << method_name << " seed " << seed << ": up to date at "
                << res.dir.string() << "\n";
      continue;
    }
    std::cout << "[distill] " << method_name << " seed " << seed << ": best metric "
              << res.log.best_metric << " (step " << res.log.best_step << "), final "
              << res.log.final_metric << " -> " << res.dir.string() << "\n";
  }
}

void cmd_matrix(const CommonArgs& args) {
  const ExperimentConfig cfg = load_and_override(args);

  struct Cell {
    Method method;
    uint64_t seed;
    std::string status;
    std::exception_ptr error;
  };
  std::vector<Cell> cells;
  for (const auto& m : cfg.methods)
    for (uint64_t seed : cfg.seeds) cells.push_back({method_from_string(m), seed, "", nullptr});

  std::atomic<size_t> next{0};
  std::mutex io;
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& cell = cells[i];
      try {
        const auto res = run_distill_stage(cfg, cell.method, cell.seed, cfg.out_root,
                                           args.force, RerunPolicy::skip);
        cell.status = res.skipped
                          ? "skipped (up to date)"
                          : "ok, best metric " + std::to_string(res.log.best_metric);
      } catch (...) {
        cell.error = std::current_exception();
        cell.status = "failed";
      }
      std::lock_guard<std::mutex> lock(io);
      std::cout << "[matrix] " << to_string(cell.method) << " seed " << cell.seed << ": "
                << cell.status << "\n";
    }
  };

  const int n_workers = worker_count(cells.size());
  std::vector<std::thread> workers;
  for (int i = 1; i < n_workers; ++i) workers.emplace_back(work);
  work();
  for (auto& w : workers) w.join();

  for (const auto& cell : cells)
    if (cell.error) std::rethrow_exception(cell.error);
}

void cmd_report(const CommonArgs& args) {
  const ExperimentConfig cfg = load_and_override(args);
  run_report(cfg, cfg.out_root, std::cout);
  std::cout << "report: wrote "
            << (task_dir(cfg.out_root, cfg.task.name) / "summary.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"teacher-student knowledge distillation laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string method_name;

  auto add_common = [&](CLI::App* cmd, bool with_force, bool with_seeds) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", args.out_override, "output root (overrides config out_root)");
    if (with_seeds) cmd->add_option("--seeds", args.seeds_csv, "comma-separated seed list");
    if (with_force) cmd->add_flag("--force", args.force, "redo completed stages");
  };

  CLI::App* sft = app.add_subcommand("sft", "train teacher and student SFT checkpoint stores");
  add_common(sft, true, true);

  CLI::App* distill = app.add_subcommand("distill", "run one distillation method");
  add_common(distill, true, true);
  distill->add_option("--method", method_name, "sft_only|td|rkl|taid|cd|scd|scd_aw")->required();

  CLI::App* matrix = app.add_subcommand("matrix", "run all configured methods x seeds");
  add_common(matrix, true, true);

  CLI::App* report = app.add_subcommand("report", "aggregate runs and emit analysis files");
  add_common(report, false, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sft->parsed()) cmd_sft(args);
    else if (distill->parsed()) cmd_distill(args, method_name);
    else if (matrix->parsed()) cmd_matrix(args);
    else if (report->parsed()) cmd_report(args);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 4;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
