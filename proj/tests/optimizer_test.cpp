/*
 * Copyright 2026 The DSS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dss/optimizer.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "dss/objectives.hpp"

namespace dss {
namespace {

const ConfigSpace kLine({ParamSpec::continuous("x", 0.0, 1.0)});

std::vector<EvalRecord> Records(const std::vector<double>& scores) {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    EvalRecord r;
    r.config = {{static_cast<double>(i) / static_cast<double>(scores.size())}};
    r.score = scores[i];
    r.eval_index = i;
    out.push_back(r);
  }
  return out;
}

TEST(UpdateTrials, AllIdenticalFlagged) {
  TrialDatabase db{kLine, {}};
  const auto rep = update_trials(db, Records(std::vector<double>(10, 0.5)), 1e-9, 0.8);
  EXPECT_TRUE(rep.flagged);
  EXPECT_DOUBLE_EQ(rep.duplicate_fraction, 1.0);
  EXPECT_EQ(db.size(), 10u);
}

TEST(UpdateTrials, DistinctNotFlagged) {
  TrialDatabase db{kLine, {}};
  const auto rep =
      update_trials(db, Records({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}), 1e-9, 0.8);
  EXPECT_FALSE(rep.flagged);
  EXPECT_DOUBLE_EQ(rep.duplicate_fraction, 0.1);
}

TEST(UpdateTrials, EpsilonClustering) {
  TrialDatabase db{kLine, {}};
  const auto rep = update_trials(db, Records({0.5, 0.5 + 1e-10, 0.9}), 1e-9, 0.6);
  EXPECT_TRUE(rep.flagged);
  EXPECT_NEAR(rep.duplicate_fraction, 2.0 / 3.0, 1e-15);
}

TEST(UpdateTrials, NonFiniteScoresBecomeFailures) {
  TrialDatabase db{kLine, {}};
  update_trials(db, Records({1.0, std::nan(""), INFINITY}), 1e-9, 0.8);
  EXPECT_EQ(db.size(), 3u);
  EXPECT_EQ(db.valid_count(), 1u);
  EXPECT_TRUE(db.records[1].failed);
  EXPECT_EQ(db.training_data().second, (std::vector<double>{1.0}));
}

TEST(UpdateTrials, PreconditionsAndInvalidConfig) {
  TrialDatabase db{kLine, {}};
  EXPECT_THROW(update_trials(db, {}, -1.0, 0.8), std::invalid_argument);
  EXPECT_THROW(update_trials(db, {}, 1e-9, 0.0), std::invalid_argument);
  auto bad = Records({1.0});
  bad[0].config = {{2.0}};
  EXPECT_ANY_THROW(update_trials(db, bad, 1e-9, 0.8));
}

TEST(LargestScoreCluster, AgreesWithBruteForceProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    const int n = 1 + trial % 15;
    for (int i = 0; i < n; ++i) s.push_back(std::floor(uniform01(rng) * 6) * 0.1);
    const double eps = 0.1 * (trial % 3) + 1e-9;
    std::size_t brute = 0;
    for (double lo : s) {
      std::size_t c = 0;
      for (double v : s) c += v >= lo && v - lo <= eps;
      brute = std::max(brute, c);
    }
    EXPECT_EQ(largest_score_cluster(s, eps), brute);
  }
}

TEST(Best, TieBreaksAndExclusions) {
  TrialDatabase db{kLine, {}};
  EXPECT_THROW(best(db), std::runtime_error);
  update_trials(db, Records({3.0}), 1e-9, 0.8);
  EXPECT_EQ(best(db).score, 3.0);
  db.records.clear();
  update_trials(db, Records({2.0, 2.0}), 1e-9, 0.8);
  EXPECT_EQ(best(db).eval_index, 0u);
  db.records.clear();
  auto rs = Records({0.1, 5.0, 4.0});
  rs[0].failed = true;
  update_trials(db, rs, 1e-9, 0.8);
  EXPECT_EQ(best(db).score, 4.0);
}

Objective Branin() { return as_objective(branin()); }

TEST(Run, BudgetEqualToInitialDesign) {
  const auto obj = branin();
  const auto r = run(Branin(), obj.space, default_pool(), {8}, {}, 1);
  EXPECT_EQ(r.db.size(), 8u);
  EXPECT_EQ(r.trace.size(), 1u);
  double m = INFINITY;
  for (const auto& rec : r.db.records) {
    EXPECT_EQ(rec.role, BatchRole::init);
    m = std::min(m, rec.score);
  }
  EXPECT_EQ(r.best.score, m);
}

TEST(Run, RejectsBudgetBelowInitialDesign) {
  const auto obj = branin();
  EXPECT_THROW(run(Branin(), obj.space, default_pool(), {7}, {}, 1), std::invalid_argument);
}

TEST(Run, ConstantObjectiveExploresOnly) {
  const Objective flat = [](const Configuration&, std::uint64_t) { return EvalOutcome{1.0, {}}; };
  const auto obj = branin();
  const auto r = run(flat, obj.space, default_pool(), {20}, {}, 3);
  EXPECT_EQ(r.db.size(), 20u);
  EXPECT_TRUE(r.trace[0].anomaly);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    EXPECT_TRUE(r.trace[i].anomaly);
    EXPECT_FALSE(r.trace[i].surrogate_used);
    EXPECT_EQ(r.trace[i].n_exploit, 0u);
  }
  for (const auto& rec : r.db.records)
    EXPECT_EQ(rec.role, rec.iteration == 0 ? BatchRole::init : BatchRole::explore);
}

TEST(Run, BraninSeedSevenRegression) {
  const auto obj = branin();
  const auto r = run(Branin(), obj.space, default_pool(), {40}, {}, 7);
  EXPECT_EQ(r.db.size(), 40u);
  double prev = INFINITY;
  for (const auto& s : r.trace) {
    EXPECT_LE(s.incumbent, prev);
    prev = s.incumbent;
  }
  EXPECT_LE(r.best.score, 1.0);
  EXPECT_EQ(r.best.score, r.trace.back().incumbent);
  bool exploited = false;
  for (std::size_t i = 1; i < r.trace.size(); ++i) exploited |= r.trace[i].n_exploit > 0;
  EXPECT_TRUE(exploited);
}

TEST(Run, BudgetAndCellInvariantsProperty) {
  const auto obj = styblinski_tang_2d();
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (std::size_t budget : {9u, 17u, 23u}) {
      OptimizerOptions opt;
      opt.parallel_slots = 1 + seed % 5;
      const auto r = run(as_objective(obj), obj.space, default_pool(), {budget}, opt, seed);
      EXPECT_EQ(r.db.size(), budget);
      std::set<CellKey> cells;
      for (std::size_t i = 0; i < r.db.size(); ++i) {
        EXPECT_EQ(r.db.records[i].eval_index, i);
        EXPECT_TRUE(cells.insert(cell_key(obj.space, r.db.records[i].config, 16)).second);
      }
      for (const auto& s : r.trace) EXPECT_LE(s.n_exploit + s.n_explore, opt.parallel_slots);
    }
  }
}

TEST(Run, ExploitFractionZeroNeverExploits) {
  const auto obj = branin();
  OptimizerOptions opt;
  opt.acquisition.exploit_fraction = 0.0;
  const auto r = run(Branin(), obj.space, default_pool(), {20}, opt, 2);
  for (const auto& rec : r.db.records) EXPECT_NE(rec.role, BatchRole::exploit);
}

std::string TraceCsv(const RunResult& r) {
  std::ostringstream os;
  write_trace_csv(os, r);
  std::string out;
  // Drop the wall-time column.
  std::istringstream in(os.str());
  for (std::string line; std::getline(in, line);) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

TEST(Run, IndependentOfWorkerCount) {
  const auto obj = branin();
  OptimizerOptions a, b;
  a.workers = 1;
  b.workers = 4;
  b.selection_workers = 3;
  const auto ra = run(Branin(), obj.space, default_pool(), {24}, a, 5);
  const auto rb = run(Branin(), obj.space, default_pool(), {24}, b, 5);
  EXPECT_EQ(TraceCsv(ra), TraceCsv(rb));
  for (std::size_t i = 0; i < ra.db.size(); ++i)
    EXPECT_EQ(ra.db.records[i].config, rb.db.records[i].config);
}

TEST(Run, FixedAndRandomModes) {
  const auto obj = branin();
  OptimizerOptions fixed;
  fixed.mode = SelectionMode::fixed;
  EXPECT_THROW(run(Branin(), obj.space, {}, {20}, fixed, 1), std::invalid_argument);
  fixed.fixed_spec = SurrogateSpec{ForestParams{16, 0, 2}, 0};
  const auto rf = run(Branin(), obj.space, {}, {20}, fixed, 1);
  for (std::size_t i = 1; i < rf.trace.size(); ++i)
    EXPECT_EQ(rf.trace[i].selected->family(), Family::random_forest);

  OptimizerOptions random;
  random.mode = SelectionMode::none;
  const auto rr = run(Branin(), obj.space, {}, {20}, random, 1);
  for (std::size_t i = 1; i < rr.trace.size(); ++i) EXPECT_FALSE(rr.trace[i].selected.has_value());
}

TEST(Run, PerEvaluationSeedsFollowGlobalIndex) {
  const auto obj = branin();
  std::mutex mu;
  std::map<std::uint64_t, std::uint64_t> seen;
  std::atomic<std::uint64_t> counter{0};
  const Objective spy = [&](const Configuration& c, std::uint64_t seed) {
    std::lock_guard lock(mu);
    seen[counter++] = seed;
    return EvalOutcome{branin_value(c.values[0], c.values[1]), {}};
  };
  OptimizerOptions opt;
  opt.workers = 1;
  run(spy, obj.space, default_pool(), {12}, opt, 99);
  ASSERT_EQ(seen.size(), 12u);
  for (const auto& [i, s] : seen) EXPECT_EQ(s, derive_seed(99, Stream::evaluation, i));
}

TEST(Run, FailedEvaluationsConsumeBudget) {
  const auto obj = branin();
  const Objective flaky = [](const Configuration& c, std::uint64_t seed) {
    if (seed % 7 == 0) throw std::runtime_error("engine crashed");
    if (seed % 7 == 1 && c.values[0] > 5.0) return EvalOutcome{std::nan(""), {}};
    return EvalOutcome{branin_value(c.values[0], c.values[1]), {}};
  };
  const auto r = run(flaky, obj.space, default_pool(), {30}, {}, 4);
  EXPECT_EQ(r.db.size(), 30u);
  std::size_t failures = 0;
  for (const auto& rec : r.db.records) {
    if (!rec.failed) continue;
    ++failures;
    EXPECT_FALSE(rec.error.empty());
  }
  EXPECT_GT(failures, 0u);
  EXPECT_FALSE(r.best.failed);
  EXPECT_TRUE(std::isfinite(r.best.score));
}

TEST(Run, AbortsWhenEveryEvaluationFails) {
  const auto obj = branin();
  const Objective broken = [](const Configuration&, std::uint64_t) -> EvalOutcome {
    throw std::runtime_error("down");
  };
  EXPECT_THROW(run(broken, obj.space, default_pool(), {20}, {}, 1), RunAborted);
}

TEST(Run, SmallDiscreteSpaceStopsWhenExhausted) {
  const ConfigSpace s({ParamSpec::categorical("c", {"a", "b", "c", "d"}), ParamSpec::integer("k", 0, 2)});
  const Objective f = [](const Configuration& c, std::uint64_t) {
    return EvalOutcome{c.values[0] + 0.1 * c.values[1], {}};
  };
  // 4 choices x 3 integer cells; the initial design may not collide.
  const auto r = run(f, s, default_pool(), {40}, {}, 1);
  EXPECT_EQ(r.db.size(), 12u);
  std::set<CellKey> cells;
  for (const auto& rec : r.db.records) EXPECT_TRUE(cells.insert(cell_key(s, rec.config, 16)).second);
  EXPECT_EQ(r.best.score, 0.0);
}

TEST(Export, TraceCsvAndJson) {
  const auto obj = branin();
  const auto r = run(Branin(), obj.space, default_pool(), {12}, {}, 8);
  std::ostringstream os;
  write_trace_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "iteration,eval_index,score,incumbent_best,selected_family,selected_ratio,batch_role,"
            "wall_time_ms");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 12u);
  const auto j = to_json(r);
  EXPECT_EQ(j["records"].size(), 12u);
  EXPECT_DOUBLE_EQ(j["best"]["score"].get<double>(), r.best.score);
}

}  // namespace
}  // namespace dss
