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

// The dynamic surrogate switching loop: Latin hypercube start, then per
// iteration re-select the surrogate with the best cross-validated explained
// variance, rank fresh candidates with it, and evaluate a mixed
// exploit/explore batch. Stops after a fixed number of engine evaluations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dss/acquisition.hpp"
#include "dss/config_space.hpp"
#include "dss/parallel.hpp"
#include "dss/random.hpp"
#include "dss/surrogates.hpp"

namespace dss {

// Lower is better.
struct EvalOutcome {
  double score = 0.0;
  std::map<std::string, double> meta;
};

// Must be safe to call concurrently; `seed` is the per-evaluation stream.
using Objective = std::function<EvalOutcome(const Configuration&, std::uint64_t seed)>;

struct EvalRecord {
  Configuration config;
  double score = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
  std::size_t iteration = 0;
  std::size_t eval_index = 0;
  BatchRole role = BatchRole::init;
  double wall_time_ms = 0.0;
  std::map<std::string, double> engine_meta;
};

struct TrialDatabase {
  ConfigSpace space;
  std::vector<EvalRecord> records;

  std::size_t size() const noexcept { return records.size(); }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                   [](const EvalRecord& r) { return !r.failed; }));
  }

  // Encoded inputs and scores of all non-failed records.
  std::pair<std::vector<FeatureVector>, std::vector<double>> training_data() const {
    std::pair<std::vector<FeatureVector>, std::vector<double>> out;
    for (const auto& r : records) {
      if (r.failed) continue;
      out.first.push_back(encode(space, r.config));
      out.second.push_back(r.score);
    }
    return out;
  }
};

struct AnomalyReport {
  bool flagged = false;
  double duplicate_fraction = 0.0;
  std::string message;
};

// Size of the largest group of scores lying within `epsilon` of each other.
inline std::size_t largest_score_cluster(std::vector<double> scores, double epsilon) {
  std::sort(scores.begin(), scores.end());
  std::size_t best = 0;
  for (std::size_t lo = 0, hi = 0; hi < scores.size(); ++hi) {
    while (scores[hi] - scores[lo] > epsilon) ++lo;
    best = std::max(best, hi - lo + 1);
  }
  return best;
}

// Appends the records and checks all valid scores for near-duplicates.
// Records with non-finite scores are marked failed.
inline AnomalyReport update_trials(TrialDatabase& db, std::vector<EvalRecord> new_records,
                                   double epsilon, double dup_threshold) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("update_trials: epsilon must be >= 0");
  if (!(dup_threshold > 0.0 && dup_threshold <= 1.0))
    throw std::invalid_argument("update_trials: dup_threshold must be in (0, 1]");
  for (auto& r : new_records) {
    db.space.require(r.config);
    if (!r.failed && !std::isfinite(r.score)) {
      r.failed = true;
      if (r.error.empty()) r.error = "non-finite score";
    }
    db.records.push_back(std::move(r));
  }
  std::vector<double> scores;
  for (const auto& r : db.records)
    if (!r.failed) scores.push_back(r.score);

  AnomalyReport rep;
  if (scores.empty()) {
    rep.message = "no valid evaluations";
    return rep;
  }
  const std::size_t cluster = largest_score_cluster(scores, epsilon);
  rep.duplicate_fraction = static_cast<double>(cluster) / static_cast<double>(scores.size());
  rep.flagged = rep.duplicate_fraction >= dup_threshold;
  if (rep.flagged)
    rep.message = std::to_string(cluster) + " of " + std::to_string(scores.size()) +
                  " scores are indistinguishable";
  return rep;
}

// Minimal valid score; ties go to the earliest record.
inline const EvalRecord& best(const TrialDatabase& db) {
  const EvalRecord* b = nullptr;
  for (const auto& r : db.records)
    if (!r.failed && (b == nullptr || r.score < b->score)) b = &r;
  if (b == nullptr) throw std::runtime_error("best: no successful evaluation");
  return *b;
}

struct BudgetPolicy {
  std::size_t max_engine_evals = 40;
};

enum class SelectionMode {
  dynamic,  // re-select from the pool every iteration
  fixed,    // always fit OptimizerOptions::fixed_spec
  none,     // pure random exploration
};

struct OptimizerOptions {
  std::size_t parallel_slots = 4;  // evaluations per batch
  std::size_t workers = 0;         // threads per batch; 0 = parallel_slots
  std::size_t selection_workers = 1;
  std::size_t cv_folds = 3;
  int resolution = kDefaultResolution;
  AcquisitionOptions acquisition;
  double dup_threshold = 0.8;
  double epsilon = 1e-9;
  SelectionMode mode = SelectionMode::dynamic;
  std::optional<SurrogateSpec> fixed_spec;
};

struct IterationSummary {
  std::size_t iteration = 0;
  bool anomaly = false;
  bool surrogate_used = false;
  std::optional<SurrogateSpec> selected;
  double selected_ratio = std::numeric_limits<double>::quiet_NaN();
  SurrogateRanking ranking;
  std::size_t n_candidates = 0;
  std::size_t n_exploit = 0;
  std::size_t n_explore = 0;
  double incumbent = std::numeric_limits<double>::infinity();
};

struct RunResult {
  EvalRecord best;
  std::vector<IterationSummary> trace;
  TrialDatabase db;
  ExplorationMemory memory;
};

class RunAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::size_t initial_design_size(const ConfigSpace& space) {
  return std::max<std::size_t>(2 * space.size(), 8);
}

namespace detail {

inline std::vector<EvalRecord> evaluate_batch(const Objective& objective,
                                              const std::vector<Proposal>& batch,
                                              std::size_t iteration, std::size_t first_index,
                                              std::uint64_t master_seed, std::size_t workers) {
  std::vector<EvalRecord> out(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    auto& r = out[i];
    r.config = batch[i].config;
    r.role = batch[i].role;
    r.iteration = iteration;
    r.eval_index = first_index + i;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      EvalOutcome o = objective(r.config, derive_seed(master_seed, Stream::evaluation, r.eval_index));
      r.score = o.score;
      r.engine_meta = std::move(o.meta);
      if (!std::isfinite(r.score)) {
        r.failed = true;
        r.error = "non-finite score";
      }
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
    r.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  return out;
}

}  // namespace detail

inline RunResult run(const Objective& objective, const ConfigSpace& space,
                     const std::vector<SurrogateSpec>& pool, const BudgetPolicy& budget,
                     const OptimizerOptions& options, std::uint64_t master_seed) {
  const std::size_t n_init = initial_design_size(space);
  if (budget.max_engine_evals < n_init)
    throw std::invalid_argument("run: budget " + std::to_string(budget.max_engine_evals) +
                                " is below the initial design size " + std::to_string(n_init));
  if (options.parallel_slots < 1) throw std::invalid_argument("run: parallel_slots must be >= 1");
  if (options.cv_folds < 2) throw std::invalid_argument("run: cv_folds must be >= 2");
  if (options.mode == SelectionMode::dynamic && pool.empty())
    throw std::invalid_argument("run: empty surrogate pool");
  if (options.mode == SelectionMode::fixed && !options.fixed_spec)
    throw std::invalid_argument("run: fixed mode needs a surrogate spec");

  const std::size_t workers = options.workers ? options.workers : options.parallel_slots;
  const auto& acq = options.acquisition;
  RunResult result{{}, {}, TrialDatabase{space, {}}, ExplorationMemory(options.resolution)};
  auto& db = result.db;
  auto& memory = result.memory;

  auto incumbent = [&] {
    double b = std::numeric_limits<double>::infinity();
    for (const auto& r : db.records)
      if (!r.failed) b = std::min(b, r.score);
    return b;
  };
  auto all_failed = [](const std::vector<EvalRecord>& rs) {
    return std::all_of(rs.begin(), rs.end(), [](const EvalRecord& r) { return r.failed; });
  };

  // Iteration 0: space-filling initial design. A design point whose cell is
  // already taken is redrawn uniformly among unvisited cells (dropped if none).
  Rng init_rng(derive_seed(master_seed, Stream::initial_design));
  std::vector<Proposal> init;
  for (auto& c : latin_hypercube_init(space, n_init, init_rng)) {
    for (std::size_t attempt = 0; !memory.insert(space, c); ++attempt) {
      if (attempt == acq.attempts()) break;
      c = sample_uniform(space, init_rng);
    }
    if (init.size() < memory.size()) init.push_back({std::move(c), BatchRole::init});
  }
  auto records = detail::evaluate_batch(objective, init, 0, 0, master_seed, workers);
  if (all_failed(records)) throw RunAborted("every evaluation of the initial design failed");
  AnomalyReport anomaly =
      update_trials(db, std::move(records), options.epsilon, options.dup_threshold);
  {
    IterationSummary s;
    s.anomaly = anomaly.flagged;
    s.incumbent = incumbent();
    result.trace.push_back(std::move(s));
  }

  for (std::size_t iteration = 1; db.size() < budget.max_engine_evals; ++iteration) {
    IterationSummary s;
    s.iteration = iteration;
    s.anomaly = anomaly.flagged;
    const std::size_t n_slots =
        std::min(options.parallel_slots, budget.max_engine_evals - db.size());

    double exploit_fraction = options.mode == SelectionMode::none ? 0.0 : acq.exploit_fraction;
    if (anomaly.flagged) exploit_fraction = 0.0;

    RankedCandidates ranked;
    if (exploit_fraction > 0.0 && db.valid_count() >= 2 * options.cv_folds) {
      const auto [X, y] = db.training_data();
      std::optional<FittedSurrogate> model;
      try {
        if (options.mode == SelectionMode::dynamic) {
          auto sel = select_surrogate(pool, X, y, options.cv_folds,
                                      derive_seed(master_seed, Stream::selection, iteration),
                                      DefaultFitter{}, options.selection_workers);
          s.selected_ratio = sel.ranking.winner().ratio;
          s.ranking = std::move(sel.ranking);
          model.emplace(std::move(sel.model));
        } else {
          Rng fit_rng(derive_seed(master_seed, Stream::refit, iteration));
          model.emplace(fit(*options.fixed_spec, X, y, fit_rng));
        }
      } catch (const std::exception&) {
        model.reset();
      }
      if (model) {
        s.surrogate_used = true;
        s.selected = model->spec();
        Rng cand_rng(derive_seed(master_seed, Stream::candidates, iteration));
        const auto candidates = generate_candidates(space, memory, acq.batch_size, acq.n_batches,
                                                    acq.attempts(), cand_rng);
        s.n_candidates = candidates.size();
        if (!candidates.empty()) ranked = rank_candidates(*model, space, candidates, acq.batch_size);
      }
    }

    Rng alloc_rng(derive_seed(master_seed, Stream::allocation, iteration));
    const auto batch =
        allocate_batch(ranked, space, memory, n_slots, exploit_fraction, alloc_rng, acq.attempts());
    if (batch.empty()) break;  // every cell has been visited
    for (const auto& p : batch) (p.role == BatchRole::exploit ? s.n_exploit : s.n_explore)++;

    records = detail::evaluate_batch(objective, batch, iteration, db.size(), master_seed, workers);
    if (all_failed(records))
      throw RunAborted("every evaluation of iteration " + std::to_string(iteration) + " failed");
    anomaly = update_trials(db, std::move(records), options.epsilon, options.dup_threshold);
    s.incumbent = incumbent();
    result.trace.push_back(std::move(s));
  }

  result.best = best(db);
  return result;
}

// ---------------------------------------------------------------------------
// Export

// One line per evaluation: iteration, eval_index, score, incumbent_best,
// selected_family, selected_ratio, batch_role, wall_time_ms.
inline void write_trace_csv(std::ostream& os, const RunResult& r) {
  os << "iteration,eval_index,score,incumbent_best,selected_family,selected_ratio,batch_role,"
        "wall_time_ms\n";
  os << std::setprecision(17);
  double inc = std::numeric_limits<double>::infinity();
  for (const auto& rec : r.db.records) {
    if (!rec.failed) inc = std::min(inc, rec.score);
    const auto& it = r.trace.at(rec.iteration);
    os << rec.iteration << ',' << rec.eval_index << ',';
    if (rec.failed) os << "nan";
    else os << rec.score;
    os << ',' << inc << ',' << (it.selected ? to_string(it.selected->family()) : "none") << ',';
    if (std::isfinite(it.selected_ratio)) os << it.selected_ratio;
    os << ',' << to_string(rec.role) << ',' << std::setprecision(6) << rec.wall_time_ms
       << std::setprecision(17) << '\n';
  }
}

inline nlohmann::json to_json(const EvalRecord& r) {
  nlohmann::json j{{"config", r.config.values},
                   {"failed", r.failed},
                   {"iteration", r.iteration},
                   {"eval_index", r.eval_index},
                   {"batch_role", to_string(r.role)},
                   {"wall_time_ms", r.wall_time_ms},
                   {"engine_meta", r.engine_meta}};
  if (r.failed) {
    j["score"] = nullptr;
    j["error"] = r.error;
  } else {
    j["score"] = r.score;
  }
  return j;
}

inline nlohmann::json to_json(const RunResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& s : r.trace) {
    nlohmann::json t{{"iteration", s.iteration},
                     {"anomaly", s.anomaly},
                     {"n_candidates", s.n_candidates},
                     {"n_exploit", s.n_exploit},
                     {"n_explore", s.n_explore},
                     {"incumbent", s.incumbent}};
    if (s.selected) {
      t["selected"] = to_json(*s.selected);
      t["selected"]["pool_index"] = s.selected->pool_index;
    }
    if (std::isfinite(s.selected_ratio)) t["selected_ratio"] = s.selected_ratio;
    trace.push_back(std::move(t));
  }
  nlohmann::json records = nlohmann::json::array();
  for (const auto& rec : r.db.records) records.push_back(to_json(rec));
  return {{"space", to_json(r.db.space)},
          {"best", to_json(r.best)},
          {"trace", std::move(trace)},
          {"records", std::move(records)}};
}

}  // namespace dss
