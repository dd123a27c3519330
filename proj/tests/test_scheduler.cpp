// Copyright (c) 2026 distillab contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "distillab/scheduler.hpp"
#include "support.hpp"

using namespace distillab;

namespace {

// One-row-per-sample table with the given probability rows.
ProbTable table_of(const std::vector<std::vector<double>>& rows, uint64_t fp = 7) {
  ProbTable t;
  t.dim = static_cast<int>(rows[0].size());
  t.fingerprint = fp;
  t.sample_offset.push_back(0);
  for (const auto& r : rows) {
    t.probs.insert(t.probs.end(), r.begin(), r.end());
    t.sample_offset.push_back(static_cast<int>(t.sample_offset.size()));
  }
  return t;
}

CandidateTables candidates_of(const std::vector<std::vector<std::vector<double>>>& stores,
                              int best_id) {
  CandidateTables c;
  c.best_id = best_id;
  for (const auto& rows : stores) c.by_id.push_back(table_of(rows));
  return c;
}

}  // namespace

TEST_CASE("teacher-gap metric is zero at the best checkpoint", "[scheduler]") {
  const auto c = candidates_of({{{0.5, 0.5}}, {{0.9, 0.1}}}, 2);
  REQUIRE(metric1(c, 2) == 0.0);
  // KL((0.9,0.1) || (0.5,0.5)) on a single one-position sample.
  REQUIRE(metric1(c, 1) == Catch::Approx(0.3680642071684971).margin(1e-12));
}

TEST_CASE("student-gap metric grows with candidate sharpness", "[scheduler]") {
  // Candidates sharpen from uniform toward near-one-hot; the student sits at
  // uniform, so its KL to each candidate must increase along the ladder.
  const auto c = candidates_of(
      {{{0.5, 0.5}}, {{0.7, 0.3}}, {{0.9, 0.1}}, {{0.99, 0.01}}}, 4);
  const ProbTable student = table_of({{0.5, 0.5}});
  double prev = -1.0;
  for (int j = 1; j <= 4; ++j) {
    const double m = metric2(student, c, j);
    REQUIRE(m > prev);
    prev = m;
  }
  REQUIRE(metric2(student, c, 1) == 0.0);
  // KL((0.5,0.5) || (0.9,0.1)) = ln(5/3).
  REQUIRE(metric2(student, c, 3) == Catch::Approx(0.5108256237659907).margin(1e-12));
}

TEST_CASE("selection minimizes the summed objective", "[scheduler]") {
  // Student matches candidate 2 exactly and the best checkpoint is 3, so the
  // objective trades the two terms off; candidate 2 wins on these numbers.
  const auto c = candidates_of(
      {{{0.5, 0.5}}, {{0.8, 0.2}}, {{0.97, 0.03}}}, 3);
  const ProbTable student = table_of({{0.8, 0.2}});
  const ScheduleDecision d = select_checkpoint(c, student, 0);
  REQUIRE(d.chosen_id == 2);
  REQUIRE(d.metric1.size() == 3);
  for (int j = 1; j <= 3; ++j) {
    REQUIRE(d.total[j - 1] == d.metric1[j - 1] + d.metric2[j - 1]);
    REQUIRE(d.total[j - 1] >= d.total[d.chosen_id - 1]);
  }
  REQUIRE(d.eval_fingerprint == student.fingerprint);
}

TEST_CASE("selection agrees with brute-force argmin on random stores", "[scheduler]") {
  Rng rng = Rng::stream(17, "schedstores");
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 4));
    std::vector<std::vector<std::vector<double>>> stores(n);
    for (auto& rows : stores)
      for (int s = 0; s < 3; ++s) rows.push_back(testsupport::rand_prob_vec(rng, 3));
    const int best_id = 1 + static_cast<int>(rng.uniform_int(0, n - 1));
    const auto c = candidates_of(stores, best_id);
    const ProbTable student = table_of({testsupport::rand_prob_vec(rng, 3),
                                        testsupport::rand_prob_vec(rng, 3),
                                        testsupport::rand_prob_vec(rng, 3)});

    const ScheduleDecision d = select_checkpoint(c, student, trial);
    int expect = 1;
    for (int j = 2; j <= n; ++j)
      if (d.total[j - 1] <= d.total[expect - 1]) expect = j;
    REQUIRE(d.chosen_id == expect);
  }
}

TEST_CASE("identical candidates tie toward the last checkpoint", "[scheduler]") {
  // All candidates equal: metric1 = metric2 = 0 everywhere, so the tie rule
  // must pick the largest id.
  const std::vector<std::vector<double>> rows = {{0.6, 0.4}};
  const auto c = candidates_of({rows, rows, rows, rows, rows}, 3);
  const ScheduleDecision d = select_checkpoint(c, table_of(rows), 1);
  REQUIRE(d.chosen_id == 5);
  for (double t : d.total) REQUIRE(t <= 1e-15);

  CandidateTables empty;
  REQUIRE_THROWS_AS(select_checkpoint(empty, table_of(rows), 0), DataError);
}

TEST_CASE("progressive schedule matches its closed form everywhere", "[scheduler]") {
  for (int n = 1; n <= 8; ++n) {
    for (int64_t t = 1; t <= 16; ++t) {
      for (int64_t step = 0; step <= n * t + 50; ++step) {
        const int64_t expect = std::min<int64_t>(step / t + 1, n);
        REQUIRE(progressive_id(n, t, step) == static_cast<int>(expect));
      }
    }
  }
  // Spot values: phase boundaries advance exactly at multiples of T.
  REQUIRE(progressive_id(8, 250, 0) == 1);
  REQUIRE(progressive_id(8, 250, 249) == 1);
  REQUIRE(progressive_id(8, 250, 250) == 2);
  REQUIRE(progressive_id(8, 250, 1999) == 8);
  REQUIRE(progressive_id(8, 250, 999999) == 8);

  REQUIRE_THROWS_AS(progressive_id(0, 5, 0), ConfigError);
  REQUIRE_THROWS_AS(progressive_id(3, 0, 0), ConfigError);
  REQUIRE_THROWS_AS(progressive_id(3, 5, -1), ConfigError);
}

TEST_CASE("candidate tables are built from real checkpoints", "[scheduler]") {
  auto [train, test] = gen_sine(81, 40, 30);
  const SupervisedView train_view = make_view(train);
  const SupervisedView eval_view = make_view(test);

  SftConfig cfg;
  cfg.total_steps = 40;
  cfg.batch_size = 8;
  cfg.n_checkpoints = 3;
  cfg.seed = 82;
  const CheckpointStore store =
      train_sft(init_model({2, 6, 2}, Activation::relu, 83), train_view, eval_view, cfg);

  const CandidateTables c = make_candidate_tables(store, eval_view);
  REQUIRE(c.size() == 3);
  REQUIRE(c.best_id == store.best_id);
  for (int id = 1; id <= 3; ++id) {
    const ProbTable direct = prob_table(store.by_id(id).model, eval_view);
    REQUIRE(c.table(id).probs == direct.probs);
  }
  REQUIRE(metric1(c, c.best_id) == 0.0);
}
