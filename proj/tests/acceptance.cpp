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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Arguments select a subset of criteria by number (default: all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dss/dss.hpp"
#include "test_util.hpp"

namespace {

using namespace dss;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::size_t hardware_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------
// 1. Selection-oracle equivalence

// Out-of-fold ratio recomputed from the documented fold contract: shuffle the
// row indices with the spec's stream, shuffled position p goes to fold p % k.
double oracle_ratio(const SurrogateSpec& spec, const std::vector<FeatureVector>& X,
                    const std::vector<double>& y, std::size_t k, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::cv_fold, spec.pool_index));
  const std::size_t n = X.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> oof(n);
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<FeatureVector> Xtr;
    std::vector<double> ytr;
    for (std::size_t p = 0; p < n; ++p)
      if (p % k != fold) {
        Xtr.push_back(X[perm[p]]);
        ytr.push_back(y[perm[p]]);
      }
    const FittedSurrogate model = fit(spec, Xtr, ytr, rng);
    for (std::size_t p = fold; p < n; p += k) oof[perm[p]] = model.predict(X[perm[p]]);
  }
  auto var = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size());
  };
  const double vy = var(y);
  if (vy < 1e-12) return 1.0;
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - oof[i];
  return var(r) / vy;
}

SurrogateSpec random_spec(Rng& rng, std::size_t pool_index) {
  auto pick = [&](auto... v) {
    const std::vector<std::common_type_t<decltype(v)...>> opts{v...};
    return opts[std::uniform_int_distribution<std::size_t>(0, opts.size() - 1)(rng)];
  };
  SurrogateSpec s;
  s.pool_index = pool_index;
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0:
      s.hyper = ForestParams{pick(std::size_t{4}, std::size_t{8}, std::size_t{16}, std::size_t{32}),
                             pick(0, 2, 4, 8), pick(std::size_t{1}, std::size_t{2}, std::size_t{3})};
      break;
    case 1:
      s.hyper = GpParams{std::pow(10.0, -1.3 + 1.5 * uniform01(rng)), pick(0.5, 1.0, 2.0),
                         pick(0.0, 1e-6, 1e-3, 1e-1)};
      break;
    default:
      s.hyper = BoostingParams{pick(std::size_t{5}, std::size_t{20}, std::size_t{60}),
                               pick(0.05, 0.1, 0.3), pick(1, 2, 3), std::size_t{1}};
  }
  return s;
}

Outcome criterion_selection_oracle() {
  Rng meta(20261016);
  std::size_t matches = 0, exact_ratios = 0, total_ratios = 0;
  constexpr std::size_t kTrials = 50, k = 3;
  for (std::size_t trial = 0; trial < kTrials; ++trial) {
    const std::size_t m = 4 + trial % 5;
    std::vector<SurrogateSpec> pool;
    for (std::size_t i = 0; i < m; ++i) pool.push_back(random_spec(meta, i));
    const std::size_t n = 12 + meta() % 29;
    const std::size_t d = 1 + meta() % 4;
    std::vector<FeatureVector> X;
    std::vector<double> y;
    std::vector<double> coef(d);
    for (auto& c : coef) c = 4.0 * uniform01(meta) - 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      FeatureVector x(d);
      double t = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        x[j] = uniform01(meta);
        t += coef[j] * std::sin(3.0 * x[j] + static_cast<double>(j));
      }
      X.push_back(std::move(x));
      // Every tenth trial has a constant target (degenerate-variance rule).
      y.push_back(trial % 10 == 9 ? 1.5 : t + 0.1 * (uniform01(meta) - 0.5));
    }
    const std::uint64_t seed = meta();
    const auto sel = select_surrogate(pool, X, y, k, seed, DefaultFitter{}, 4);

    std::size_t argmin = 0;
    double best = std::numeric_limits<double>::infinity();
    std::map<std::size_t, double> oracle;
    for (const auto& spec : pool) {
      const double r = oracle_ratio(spec, X, y, k, seed);
      oracle[spec.pool_index] = r;
      if (r < best) {
        best = r;
        argmin = spec.pool_index;
      }
    }
    matches += sel.ranking.winner().pool_index == argmin;
    for (const auto& e : sel.ranking.entries) {
      ++total_ratios;
      exact_ratios += e.ratio == oracle[e.pool_index];
    }
  }
  return {matches == kTrials, std::to_string(matches) + "/" + std::to_string(kTrials) +
                                  " winners equal the oracle argmin; " +
                                  std::to_string(exact_ratios) + "/" +
                                  std::to_string(total_ratios) + " ratios bitwise equal"};
}

// ---------------------------------------------------------------------------
// 2. Numerical kernels

Outcome criterion_kernels() {
  // (a) Noiseless GP interpolation at the training points.
  double interp = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const ConfigSpace unit({ParamSpec::continuous("a", 0, 1), ParamSpec::continuous("b", 0, 1)});
    std::vector<FeatureVector> X;
    std::vector<double> y;
    for (const auto& c : latin_hypercube_init(unit, 12, rng)) {
      X.push_back(encode(unit, c));
      y.push_back(std::sin(5 * c.values[0]) * std::cos(3 * c.values[1]) + c.values[0]);
    }
    const auto gp = GaussianProcess::fit(X, y, GpParams{0.2, 1.0, 0.0});
    for (std::size_t i = 0; i < X.size(); ++i) interp = std::max(interp, std::abs(gp.predict(X[i]) - y[i]));
  }
  // (b) Cholesky dual weights against Gaussian elimination.
  double dual = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [X, y] = testing_util::RandomData(15, 3, seed);
    const GpParams p{0.4, 1.7, 1e-3};
    const auto gp = GaussianProcess::fit(X, y, p);
    const std::size_t n = X.size();
    std::vector<std::vector<double>> A(n, std::vector<double>(n));
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) A[i][j] = gp.kernel(X[i], X[j]);
      A[i][i] += p.noise_variance + gp.jitter();
      z[i] = (y[i] - gp.target_mean()) / gp.target_scale();
    }
    const auto alpha = testing_util::DirectSolve(A, z);
    Rng q(seed + 100);
    for (int t = 0; t < 10; ++t) {
      const FeatureVector x{uniform01(q), uniform01(q), uniform01(q)};
      double direct = 0.0;
      for (std::size_t i = 0; i < n; ++i) direct += gp.kernel(x, X[i]) * alpha[i];
      direct = gp.target_mean() + gp.target_scale() * direct;
      dual = std::max(dual, std::abs(gp.predict(x) - direct));
    }
  }
  // (c) FFM analytic gradient against central differences.
  const double grad = testing_util::FfmGradientCheck(7, 100);
  // (d) GBM training loss over rounds.
  std::size_t increases = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [X, y] = testing_util::RandomData(30, 2, seed);
    const auto gb = GradientBoosting::fit(X, y, BoostingParams{100, 0.1, 3, 1});
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m <= 100; ++m) {
      double sse = 0.0;
      for (std::size_t i = 0; i < X.size(); ++i) {
        const double r = y[i] - gb.predict_rounds(X[i], m);
        sse += r * r;
      }
      increases += sse > prev + 1e-12;
      prev = sse;
    }
  }
  const bool pass = interp <= 1e-6 && dual <= 1e-8 && grad <= 1e-4 && increases == 0;
  return {pass, "(a) GP interpolation max error " + fmt(interp) + " (<= 1e-6); (b) dual vs direct " +
                    fmt(dual) + " (<= 1e-8); (c) FFM gradient max rel error " + fmt(grad) +
                    " over 100 coords (<= 1e-4); (d) GBM loss increases " +
                    std::to_string(increases)};
}

// ---------------------------------------------------------------------------
// 3-6 share benchmark tables.

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t last) {
  std::vector<std::uint64_t> s;
  for (auto i = first; i <= last; ++i) s.push_back(i);
  return s;
}

std::string csv(const BenchmarkTable& t) {
  std::ostringstream os;
  write_benchmark_csv(os, t);
  return os.str();
}

BenchmarkTable branin_table(std::size_t parallel_slots, std::size_t workers) {
  const auto b = branin();
  BenchmarkOptions bo;
  bo.optimizer.parallel_slots = parallel_slots;
  bo.optimizer.workers = workers;
  bo.cell_workers = hardware_workers();
  return run_benchmark({Strategy::dss(), Strategy::random()}, as_objective(b), b.name, b.space,
                       default_pool(), {40}, seed_range(1, 20), bo);
}

double median_of(const std::vector<StrategySummary>& s, const std::string& name) {
  for (const auto& x : s)
    if (x.strategy == name) return x.median_best;
  return std::numeric_limits<double>::quiet_NaN();
}

std::size_t failed_rows(const BenchmarkTable& t) {
  return static_cast<std::size_t>(
      std::count_if(t.rows.begin(), t.rows.end(), [](const BenchmarkRow& r) { return r.failed; }));
}

struct Tables {
  std::optional<BenchmarkTable> branin;
  std::optional<BenchmarkTable> ffm;
  std::shared_ptr<const ffm::SyntheticData> ffm_data;
};

Outcome criterion_branin(Tables& t) {
  t.branin = branin_table(4, 0);
  const auto s = summarize(*t.branin);
  const double dss_med = median_of(s, "dss");
  const double rnd_med = median_of(s, "random");
  const double optimum = grid_oracle(branin(), 2001).best_value;
  const bool pass = failed_rows(*t.branin) == 0 && dss_med <= 1.0 && dss_med <= rnd_med;
  return {pass, "median best dss " + fmt(dss_med) + " vs random " + fmt(rnd_med) +
                    " (grid optimum " + fmt(optimum, 6) + "); need dss <= 1.0 and dss <= random"};
}

std::shared_ptr<const ffm::SyntheticData> ffm_data(Tables& t) {
  if (!t.ffm_data)
    t.ffm_data = std::make_shared<const ffm::SyntheticData>(ffm::generate_ctr_data(1, {}));
  return t.ffm_data;
}

Outcome criterion_ffm(Tables& t) {
  const auto data = ffm_data(t);
  const auto objective =
      ffm::make_objective(std::shared_ptr<const ffm::Dataset>(data, &data->train),
                          std::shared_ptr<const ffm::Dataset>(data, &data->valid));
  BenchmarkOptions bo;
  bo.cell_workers = hardware_workers();
  t.ffm = run_benchmark({Strategy::dss(), Strategy::fixed_rf(), Strategy::fixed_gp(),
                         Strategy::fixed_gbm(), Strategy::random()},
                        objective, "ffm", ffm::tuning_space(), default_pool(), {20},
                        seed_range(1, 10), bo);
  std::map<std::pair<std::string, std::uint64_t>, double> rig;
  for (const auto& r : t.ffm->rows) rig[{r.strategy, r.seed}] = -r.best_score;
  std::size_t wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) wins += rig[{"dss", seed}] >= rig[{"random", seed}];
  const auto s = summarize(*t.ffm);
  const double dss_med = -median_of(s, "dss");
  double best_med = -std::numeric_limits<double>::infinity();
  std::string best_name;
  std::ostringstream per;
  for (const char* name : {"dss", "fixed_rf", "fixed_gp", "fixed_gbm", "random"}) {
    const double m = -median_of(s, name);
    per << (per.tellp() ? ", " : "") << name << " " << fmt(m);
    if (std::string(name) != "random" && m > best_med) {
      best_med = m;
      best_name = name;
    }
  }
  const double oracle = ffm::evaluate(data->ground_truth, data->valid).rig;
  const bool pass = failed_rows(*t.ffm) == 0 && wins >= 6 && dss_med >= best_med - 0.02;
  return {pass, "dss >= random in " + std::to_string(wins) + "/10 seeds (need >= 6); median best RIG " +
                    per.str() + "; dss trails best surrogate strategy (" + best_name + ") by " +
                    fmt(best_med - dss_med) + " (need <= 0.02); ground-truth RIG " + fmt(oracle)};
}

Outcome criterion_memory_audit(Tables& t) {
  std::size_t runs = 0, evals = 0, violations = 0;
  auto audit = [&](const BenchmarkTable& table, const ConfigSpace& space) {
    for (const auto& r : table.rows) {
      ++runs;
      std::set<CellKey> seen;
      for (const auto& row : r.trace) {
        ++evals;
        violations += !seen.insert(cell_key(space, row.config, kDefaultResolution)).second;
      }
    }
  };
  if (t.branin) audit(*t.branin, branin().space);
  if (t.ffm) audit(*t.ffm, ffm::tuning_space());
  if (runs == 0) return {false, "no traces to audit (run criteria 3 and 4 first)"};
  std::string scope = std::string(t.branin ? "criterion 3" : "") +
                      (t.branin && t.ffm ? " and " : "") + (t.ffm ? "criterion 4" : "");
  return {violations == 0, std::to_string(violations) + " shared cells across " +
                               std::to_string(evals) + " evaluations in " + std::to_string(runs) +
                               " runs (" + scope + ")"};
}

Outcome criterion_determinism(Tables& t) {
  const std::string slots4 = t.branin ? csv(*t.branin) : csv(branin_table(4, 0));
  const bool rerun4 = csv(branin_table(4, 0)) == slots4;
  const bool threads4 = csv(branin_table(4, 1)) == slots4;
  const std::string slots1 = csv(branin_table(1, 0));
  const bool rerun1 = csv(branin_table(1, 0)) == slots1;
  return {rerun4 && threads4 && rerun1,
          std::string("criterion-3 cells rerun: parallel_slots=4 ") + (rerun4 ? "identical" : "DIFFERENT") +
              ", parallel_slots=4 on 1 worker thread vs 4 " + (threads4 ? "identical" : "DIFFERENT") +
              ", parallel_slots=1 " + (rerun1 ? "identical" : "DIFFERENT") + " (" +
              std::to_string(slots4.size()) + " and " + std::to_string(slots1.size()) + " bytes)"};
}

Outcome criterion_anomaly() {
  const Objective flat = [](const Configuration&, std::uint64_t) { return EvalOutcome{1.0, {}}; };
  const auto result = run(flat, branin().space, default_pool(), {20}, {}, 1);
  std::size_t post_init = 0, explore = 0;
  for (const auto& r : result.db.records) {
    if (r.iteration == 0) continue;
    ++post_init;
    explore += r.role == BatchRole::explore;
  }
  const bool pass = result.db.size() == 20 && result.trace.front().anomaly && post_init > 0 &&
                    explore == post_init;
  return {pass, std::string("run completed with ") + std::to_string(result.db.size()) +
                    " evaluations; anomaly at first update: " +
                    (result.trace.front().anomaly ? "yes" : "no") + "; " + std::to_string(explore) +
                    "/" + std::to_string(post_init) + " post-init evaluations are explore"};
}

Outcome criterion_rig_sanity(Tables& t) {
  const auto data = ffm_data(t);
  const double p = data->valid.positive_rate();
  std::vector<int> labels;
  for (const auto& in : data->valid.instances) labels.push_back(in.label);
  const double direct =
      ffm::evaluate_probabilities(labels, std::vector<double>(labels.size(), p)).rig;
  // The same predictor expressed as a model: bias = logit(p), all else zero.
  ffm::Model m(data->valid.n_features, data->valid.n_fields, 1);
  m.bias() = std::log(p / (1.0 - p));
  const double model = ffm::evaluate(m, data->valid).rig;
  const bool pass = std::abs(direct) <= 1e-9 && std::abs(model) <= 1e-9;
  return {pass, "base rate " + fmt(p) + ": RIG " + fmt(direct, 3) + " (probabilities), " +
                    fmt(model, 3) + " (bias-only model); need |RIG| <= 1e-9"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int c) { return selected.empty() || selected.contains(c); };

  Tables tables;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"selection-oracle equivalence", criterion_selection_oracle},
      {"numerical kernels", criterion_kernels},
      {"Branin benchmark", [&] { return criterion_branin(tables); }},
      {"FFM desk-scale benchmark", [&] { return criterion_ffm(tables); }},
      {"memory invariant audit", [&] { return criterion_memory_audit(tables); }},
      {"determinism", [&] { return criterion_determinism(tables); }},
      {"anomaly path", criterion_anomaly},
      {"RIG sanity", [&] { return criterion_rig_sanity(tables); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!wanted(number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("[%s] criterion %d, %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", number,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
