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
#pragma once

// Fixed-budget comparison of search strategies: dynamic switching, a single
// fixed surrogate per family, and random search.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dss/io.hpp"
#include "dss/optimizer.hpp"

namespace dss {

enum class StrategyKind { dss, fixed_rf, fixed_gp, fixed_gbm, random };

struct Strategy {
  StrategyKind kind = StrategyKind::dss;
  std::optional<SurrogateSpec> spec;  // fixed_* only

  std::string name() const {
    switch (kind) {
      case StrategyKind::dss: return "dss";
      case StrategyKind::fixed_rf: return "fixed_rf";
      case StrategyKind::fixed_gp: return "fixed_gp";
      case StrategyKind::fixed_gbm: return "fixed_gbm";
      case StrategyKind::random: return "random";
    }
    return "?";
  }

  static Strategy dss() { return {StrategyKind::dss, std::nullopt}; }
  static Strategy random() { return {StrategyKind::random, std::nullopt}; }
  static Strategy fixed_rf() { return {StrategyKind::fixed_rf, SurrogateSpec{ForestParams{256, 0, 2}}}; }
  static Strategy fixed_gp() { return {StrategyKind::fixed_gp, SurrogateSpec{GpParams{0.3, 1.0, 1e-2}}}; }
  static Strategy fixed_gbm() {
    return {StrategyKind::fixed_gbm, SurrogateSpec{BoostingParams{300, 0.1, 3, 1}}};
  }

  static Strategy parse(const std::string& name) {
    if (name == "dss") return dss();
    if (name == "random") return random();
    if (name == "fixed_rf") return fixed_rf();
    if (name == "fixed_gp") return fixed_gp();
    if (name == "fixed_gbm") return fixed_gbm();
    throw std::invalid_argument("unknown strategy '" + name + "'");
  }

  OptimizerOptions apply(OptimizerOptions opt) const {
    switch (kind) {
      case StrategyKind::dss: opt.mode = SelectionMode::dynamic; break;
      case StrategyKind::random: opt.mode = SelectionMode::none; break;
      default:
        opt.mode = SelectionMode::fixed;
        opt.fixed_spec = spec;
    }
    return opt;
  }
};

struct TraceRow {
  std::size_t eval_index = 0;
  double score = 0.0;  // NaN for failed evaluations
  double incumbent = 0.0;
  std::string selected_family;
  std::string batch_role;
  Configuration config;  // kept in memory only; not part of the CSV
};

struct BenchmarkRow {
  std::string strategy;
  std::string objective;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  double best_score = std::numeric_limits<double>::quiet_NaN();
  std::size_t evals_to_best = 0;  // 1-based count of evaluations until the best was first seen
  double wall_time_ms = 0.0;
  std::vector<TraceRow> trace;
  bool failed = false;
  std::string error;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;  // (strategy, seed) order
};

inline std::vector<TraceRow> trace_rows(const RunResult& r) {
  std::vector<TraceRow> out;
  double inc = std::numeric_limits<double>::infinity();
  for (const auto& rec : r.db.records) {
    if (!rec.failed) inc = std::min(inc, rec.score);
    const auto& it = r.trace.at(rec.iteration);
    out.push_back({rec.eval_index, rec.failed ? std::numeric_limits<double>::quiet_NaN() : rec.score,
                   inc, it.selected ? to_string(it.selected->family()) : "none",
                   to_string(rec.role), rec.config});
  }
  return out;
}

inline void summarize_trace(BenchmarkRow& row) {
  row.best_score = std::numeric_limits<double>::quiet_NaN();
  row.evals_to_best = 0;
  for (std::size_t i = 0; i < row.trace.size(); ++i) {
    const double s = row.trace[i].score;
    if (!std::isnan(s) && (std::isnan(row.best_score) || s < row.best_score)) {
      row.best_score = s;
      row.evals_to_best = i + 1;
    }
  }
}

// Memoizes (configuration, evaluation seed) -> outcome. Strategies share the
// initial design and the evaluation seed schedule, so the initial design is
// evaluated once per benchmark seed.
class SharedEvaluations {
 public:
  explicit SharedEvaluations(Objective inner) : inner_(std::move(inner)) {}

  Objective objective() {
    return [this](const Configuration& c, std::uint64_t seed) {
      Key key{seed, {}};
      for (double v : c.values) key.second.push_back(std::bit_cast<std::uint64_t>(v));
      {
        std::lock_guard lock(mu_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
      }
      EvalOutcome o = inner_(c, seed);
      std::lock_guard lock(mu_);
      cache_.emplace(std::move(key), o);
      return o;
    };
  }

 private:
  using Key = std::pair<std::uint64_t, std::vector<std::uint64_t>>;
  Objective inner_;
  std::mutex mu_;
  std::map<Key, EvalOutcome> cache_;
};

struct BenchmarkOptions {
  OptimizerOptions optimizer;
  std::size_t cell_workers = 1;
  bool share_evaluations = true;
};

inline BenchmarkTable run_benchmark(const std::vector<Strategy>& strategies,
                                    const Objective& objective, const std::string& objective_name,
                                    const ConfigSpace& space, const std::vector<SurrogateSpec>& pool,
                                    const BudgetPolicy& budget,
                                    const std::vector<std::uint64_t>& seeds,
                                    const BenchmarkOptions& options = {}) {
  if (strategies.empty()) throw std::invalid_argument("run_benchmark: no strategies");
  if (seeds.empty()) throw std::invalid_argument("run_benchmark: no seeds");
  SharedEvaluations shared(objective);
  const Objective eval = options.share_evaluations ? shared.objective() : objective;

  BenchmarkTable table;
  table.rows.resize(strategies.size() * seeds.size());
  parallel_for(table.rows.size(), options.cell_workers, [&](std::size_t cell) {
    const auto& strategy = strategies[cell / seeds.size()];
    const std::uint64_t seed = seeds[cell % seeds.size()];
    auto& row = table.rows[cell];
    row.strategy = strategy.name();
    row.objective = objective_name;
    row.seed = seed;
    row.budget = budget.max_engine_evals;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const RunResult r = run(eval, space, pool, budget, strategy.apply(options.optimizer), seed);
      row.trace = trace_rows(r);
      summarize_trace(row);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    row.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  return table;
}

// ---------------------------------------------------------------------------
// Aggregation

// Lower median: element (n - 1) / 2 of the sorted values.
inline double lower_median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("lower_median: empty input");
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

// Lower quantile: element floor(q * (n - 1)) of the sorted values.
inline double lower_quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("lower_quantile: empty input");
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)))];
}

struct StrategySummary {
  std::string strategy;
  std::string objective;
  double median_best = 0.0;
  double iqr_best = 0.0;
  double median_evals_to_best = 0.0;
  std::size_t runs = 0;
};

// Per strategy, in first-appearance order; failed rows are skipped.
inline std::vector<StrategySummary> summarize(const BenchmarkTable& table) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const BenchmarkRow*>> groups;
  for (const auto& r : table.rows) {
    if (r.failed || std::isnan(r.best_score)) continue;
    if (!groups.contains(r.strategy)) order.push_back(r.strategy);
    groups[r.strategy].push_back(&r);
  }
  std::vector<StrategySummary> out;
  for (const auto& name : order) {
    std::vector<double> best, evals;
    for (const auto* r : groups[name]) {
      best.push_back(r->best_score);
      evals.push_back(static_cast<double>(r->evals_to_best));
    }
    out.push_back({name, groups[name].front()->objective, lower_median(best),
                   lower_quantile(best, 0.75) - lower_quantile(best, 0.25), lower_median(evals),
                   best.size()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kBenchmarkCsvHeader =
    "strategy,objective,seed,budget,eval_index,score,incumbent_best,selected_family,batch_role";

inline void write_benchmark_csv(std::ostream& os, const BenchmarkTable& table) {
  if (table.rows.empty()) throw std::invalid_argument("export_csv: empty table");
  os << kBenchmarkCsvHeader << '\n' << std::setprecision(17);
  for (const auto& r : table.rows)
    for (const auto& t : r.trace)
      os << r.strategy << ',' << r.objective << ',' << r.seed << ',' << r.budget << ','
         << t.eval_index << ',' << t.score << ',' << t.incumbent << ',' << t.selected_family << ','
         << t.batch_role << '\n';
}

inline void export_csv(const BenchmarkTable& table, const std::filesystem::path& path) {
  if (table.rows.empty()) throw std::invalid_argument("export_csv: empty table");
  write_file_atomic(path, [&](std::ostream& os) { write_benchmark_csv(os, table); });
}

// Rebuilds a table from its CSV. best_score and evals_to_best are recomputed
// from the trace; wall time is not part of the CSV and reads back as 0.
inline BenchmarkTable read_benchmark_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kBenchmarkCsvHeader)
    throw std::invalid_argument("benchmark csv: unexpected header");
  BenchmarkTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
    if (f.size() != 9)
      throw std::invalid_argument("benchmark csv: line " + std::to_string(line_no) +
                                  ": expected 9 columns");
    try {
      const std::uint64_t seed = std::stoull(f[2]);
      if (table.rows.empty() || table.rows.back().strategy != f[0] ||
          table.rows.back().objective != f[1] || table.rows.back().seed != seed) {
        BenchmarkRow r;
        r.strategy = f[0];
        r.objective = f[1];
        r.seed = seed;
        r.budget = std::stoull(f[3]);
        table.rows.push_back(std::move(r));
      }
      table.rows.back().trace.push_back(
          {std::stoull(f[4]), std::stod(f[5]), std::stod(f[6]), f[7], f[8], {}});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("benchmark csv: line " + std::to_string(line_no) +
                                  ": malformed number");
    }
  }
  for (auto& r : table.rows) summarize_trace(r);
  return table;
}

inline void write_summary_csv(std::ostream& os, const std::vector<StrategySummary>& summary) {
  os << "strategy,objective,median_best,iqr_best,median_evals_to_best\n" << std::setprecision(17);
  for (const auto& s : summary)
    os << s.strategy << ',' << s.objective << ',' << s.median_best << ',' << s.iqr_best << ','
       << s.median_evals_to_best << '\n';
}

}  // namespace dss
