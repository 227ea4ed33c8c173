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

// Surrogate regressors (random forest, Gaussian process, gradient boosting)
// and selection of the pool member with the lowest cross-validated residual
// variance ratio Var(y - s(D)) / Var(y).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dss/config_space.hpp"
#include "dss/gaussian_process.hpp"
#include "dss/parallel.hpp"
#include "dss/random.hpp"
#include "dss/tree.hpp"

namespace dss {

enum class Family { random_forest, gaussian_process, gradient_boosting };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::random_forest: return "random_forest";
    case Family::gaussian_process: return "gaussian_process";
    case Family::gradient_boosting: return "gradient_boosting";
  }
  return "?";
}

struct ForestParams {
  std::size_t n_trees = 64;
  int max_depth = 0;  // 0 = unbounded
  std::size_t min_leaf = 2;
};

struct BoostingParams {
  std::size_t n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  std::size_t min_leaf = 1;
};

struct SurrogateSpec {
  std::variant<ForestParams, GpParams, BoostingParams> hyper;
  std::size_t pool_index = 0;

  Family family() const noexcept { return static_cast<Family>(hyper.index()); }

  void validate() const {
    std::visit(
        [](const auto& h) {
          using T = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<T, ForestParams>) {
            if (h.n_trees < 1 || h.min_leaf < 1 || h.max_depth < 0)
              throw std::invalid_argument("random_forest: counts must be >= 1");
          } else if constexpr (std::is_same_v<T, GpParams>) {
            if (!(h.length_scale > 0) || !(h.signal_variance > 0) || !(h.noise_variance >= 0))
              throw std::invalid_argument(
                  "gaussian_process: need length_scale > 0, signal_variance > 0, "
                  "noise_variance >= 0");
          } else {
            if (h.n_rounds < 1 || h.max_depth < 1 || h.min_leaf < 1)
              throw std::invalid_argument("gradient_boosting: counts must be >= 1");
            if (!(h.learning_rate > 0 && h.learning_rate <= 1))
              throw std::invalid_argument("gradient_boosting: learning_rate must be in (0, 1]");
          }
        },
        hyper);
  }

  std::string summary() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& h) {
          using T = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<T, ForestParams>) {
            os << "n_trees=" << h.n_trees << ";max_depth="
               << (h.max_depth == 0 ? std::string("none") : std::to_string(h.max_depth))
               << ";min_leaf=" << h.min_leaf;
          } else if constexpr (std::is_same_v<T, GpParams>) {
            os << "length_scale=" << h.length_scale << ";signal_variance=" << h.signal_variance
               << ";noise_variance=" << h.noise_variance;
          } else {
            os << "n_rounds=" << h.n_rounds << ";learning_rate=" << h.learning_rate
               << ";max_depth=" << h.max_depth;
          }
        },
        hyper);
    return os.str();
  }
};

// The default pool: every (family, setting) combination listed below, in
// this order. pool_index follows position.
inline std::vector<SurrogateSpec> default_pool() {
  std::vector<SurrogateSpec> pool;
  for (std::size_t trees : {64, 256})
    for (int depth : {0, 8}) pool.push_back({ForestParams{trees, depth, 2}});
  for (double ls : {0.1, 0.3, 1.0})
    for (double noise : {1e-6, 1e-2}) pool.push_back({GpParams{ls, 1.0, noise}});
  for (std::size_t rounds : {100, 300})
    for (double lr : {0.05, 0.1}) pool.push_back({BoostingParams{rounds, lr, 3, 1}});
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i].pool_index = i;
  return pool;
}

// ---------------------------------------------------------------------------
// Models

class RandomForest {
 public:
  static RandomForest fit(const std::vector<FeatureVector>& X, std::span<const double> y,
                          const ForestParams& p, Rng& rng) {
    const std::size_t n = X.size();
    const std::size_t d = X.front().size();
    TreeOptions opt;
    opt.max_depth = p.max_depth;
    opt.min_leaf = p.min_leaf;
    opt.max_features = (d + 2) / 3;
    RandomForest rf;
    rf.trees_.reserve(p.n_trees);
    std::vector<std::size_t> rows(n);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    for (std::size_t t = 0; t < p.n_trees; ++t) {
      for (auto& r : rows) r = draw(rng);
      rf.trees_.push_back(RegressionTree::fit(X, y, rows, opt, &rng));
    }
    return rf;
  }

  double predict(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(x);
    return s / static_cast<double>(trees_.size());
  }

  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

 private:
  std::vector<RegressionTree> trees_;
};

// Squared-error gradient boosting: F_0 = mean(y), F_m = F_{m-1} + lr * tree_m
// where tree_m is fit to the residuals y - F_{m-1}.
class GradientBoosting {
 public:
  static GradientBoosting fit(const std::vector<FeatureVector>& X, std::span<const double> y,
                              const BoostingParams& p) {
    const std::size_t n = X.size();
    GradientBoosting gb;
    gb.learning_rate_ = p.learning_rate;
    gb.init_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    TreeOptions opt;
    opt.max_depth = p.max_depth;
    opt.min_leaf = p.min_leaf;
    std::vector<double> fitted(n, gb.init_);
    std::vector<double> resid(n);
    gb.trees_.reserve(p.n_rounds);
    for (std::size_t m = 0; m < p.n_rounds; ++m) {
      for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - fitted[i];
      gb.trees_.push_back(RegressionTree::fit(X, resid, opt));
      for (std::size_t i = 0; i < n; ++i) fitted[i] += p.learning_rate * gb.trees_.back().predict(X[i]);
    }
    return gb;
  }

  double predict(std::span<const double> x) const { return predict_rounds(x, trees_.size()); }

  // Prediction using only the first `rounds` stages.
  double predict_rounds(std::span<const double> x, std::size_t rounds) const {
    double f = init_;
    for (std::size_t m = 0; m < std::min(rounds, trees_.size()); ++m)
      f += learning_rate_ * trees_[m].predict(x);
    return f;
  }

  double initial_value() const noexcept { return init_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

 private:
  double init_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<RegressionTree> trees_;
};

class FittedSurrogate {
 public:
  using Model = std::variant<RandomForest, GaussianProcess, GradientBoosting>;

  FittedSurrogate(SurrogateSpec spec, Model model, std::size_t train_size, std::size_t dim)
      : spec_(std::move(spec)), model_(std::move(model)), train_size_(train_size), dim_(dim) {}

  double predict(std::span<const double> x) const {
    if (x.size() != dim_) throw std::invalid_argument("predict: feature dimension mismatch");
    return std::visit([&](const auto& m) { return m.predict(x); }, model_);
  }

  std::vector<double> predict(const std::vector<FeatureVector>& X) const {
    std::vector<double> out;
    out.reserve(X.size());
    for (const auto& x : X) out.push_back(predict(x));
    return out;
  }

  const SurrogateSpec& spec() const noexcept { return spec_; }
  const Model& model() const noexcept { return model_; }
  std::size_t train_size() const noexcept { return train_size_; }
  std::size_t dim() const noexcept { return dim_; }

 private:
  SurrogateSpec spec_;
  Model model_;
  std::size_t train_size_;
  std::size_t dim_;
};

namespace detail {
inline void check_training_data(const std::vector<FeatureVector>& X, std::span<const double> y) {
  if (X.size() != y.size()) throw std::invalid_argument("fit: |X| != |y|");
  if (X.size() < 2) throw std::invalid_argument("fit: need at least 2 samples");
  const std::size_t d = X.front().size();
  for (const auto& x : X)
    if (x.size() != d) throw std::invalid_argument("fit: feature dimension mismatch");
}
}  // namespace detail

inline FittedSurrogate fit(const SurrogateSpec& spec, const std::vector<FeatureVector>& X,
                           std::span<const double> y, Rng& rng) {
  detail::check_training_data(X, y);
  spec.validate();
  const std::size_t d = X.front().size();
  FittedSurrogate::Model model = std::visit(
      [&](const auto& h) -> FittedSurrogate::Model {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, ForestParams>) return RandomForest::fit(X, y, h, rng);
        else if constexpr (std::is_same_v<T, GpParams>) return GaussianProcess::fit(X, y, h);
        else return GradientBoosting::fit(X, y, h);
      },
      spec.hyper);
  return FittedSurrogate(spec, std::move(model), X.size(), d);
}

// Fitter used by the cross-validation and selection templates below. Any
// callable with this signature whose result has predict(X) -> vector<double>
// can stand in (e.g. test doubles).
struct DefaultFitter {
  FittedSurrogate operator()(const SurrogateSpec& s, const std::vector<FeatureVector>& X,
                             std::span<const double> y, Rng& rng) const {
    return fit(s, X, y, rng);
  }
};

// ---------------------------------------------------------------------------
// Explained-variance scoring

inline double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

inline constexpr double kDegenerateVariance = 1e-12;

// Var(y - pred) / Var(y), population variances; 1.0 when Var(y) < 1e-12.
inline double residual_variance_ratio(std::span<const double> y, std::span<const double> pred) {
  if (y.size() != pred.size()) throw std::invalid_argument("ratio: size mismatch");
  const double vy = population_variance(y);
  if (vy < kDegenerateVariance) return 1.0;
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - pred[i];
  return population_variance(r) / vy;
}

// Shuffles with rng, assigns shuffled position p to fold p % k, and scores
// the assembled out-of-fold predictions.
template <class Spec, class Fitter = DefaultFitter>
double cv_residual_variance_ratio(const Spec& spec, const std::vector<FeatureVector>& X,
                                  std::span<const double> y, std::size_t k, Rng& rng,
                                  const Fitter& fitter = {}) {
  if (k < 2) throw std::invalid_argument("cv: need k >= 2 folds");
  if (X.size() != y.size()) throw std::invalid_argument("cv: |X| != |y|");
  if (X.size() < 2 * k) throw std::invalid_argument("cv: need |X| >= 2k");
  const std::size_t n = X.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<double> oof(n, 0.0);
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<FeatureVector> Xtr, Xte;
    std::vector<double> ytr;
    std::vector<std::size_t> held;
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t i = perm[p];
      if (p % k == fold) {
        Xte.push_back(X[i]);
        held.push_back(i);
      } else {
        Xtr.push_back(X[i]);
        ytr.push_back(y[i]);
      }
    }
    const auto model = fitter(spec, Xtr, ytr, rng);
    const std::vector<double> pred = model.predict(Xte);
    for (std::size_t j = 0; j < held.size(); ++j) oof[held[j]] = pred[j];
  }
  return residual_variance_ratio(y, oof);
}

struct RankEntry {
  std::size_t pool_index = 0;
  double ratio = 0.0;  // +inf when the spec failed to fit
  bool failed = false;
};

// Ascending by ratio, ties by pool_index.
struct SurrogateRanking {
  std::vector<RankEntry> entries;

  const RankEntry& winner() const { return entries.front(); }
};

template <class Model>
struct Selection {
  SurrogateRanking ranking;
  Model model;
};

// Scores every pool member by cross-validation (stream per pool_index),
// ranks them, and refits the winner on all data.
template <class Spec, class Fitter = DefaultFitter>
auto select_surrogate(std::span<const Spec> pool, const std::vector<FeatureVector>& X,
                      std::span<const double> y, std::size_t k, std::uint64_t seed,
                      const Fitter& fitter = {}, std::size_t workers = 1)
    -> Selection<decltype(fitter(pool.front(), X, y, std::declval<Rng&>()))> {
  if (pool.empty()) throw std::invalid_argument("select_surrogate: empty pool");
  if (X.size() < 2 * k) throw std::invalid_argument("select_surrogate: need |X| >= 2k");

  std::vector<RankEntry> scored(pool.size());
  parallel_for(pool.size(), workers, [&](std::size_t i) {
    const auto& spec = pool[i];
    scored[i].pool_index = spec.pool_index;
    try {
      Rng rng(derive_seed(seed, Stream::cv_fold, spec.pool_index));
      const double r = cv_residual_variance_ratio(spec, X, y, k, rng, fitter);
      if (!std::isfinite(r)) throw FitError("non-finite ratio");
      scored[i].ratio = r;
    } catch (const std::exception&) {
      scored[i].ratio = std::numeric_limits<double>::infinity();
      scored[i].failed = true;
    }
  });

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].ratio != scored[b].ratio) return scored[a].ratio < scored[b].ratio;
    return scored[a].pool_index < scored[b].pool_index;
  });
  SurrogateRanking ranking;
  for (auto i : order) ranking.entries.push_back(scored[i]);
  if (ranking.winner().failed) throw FitError("select_surrogate: every pool member failed");

  const auto& best = pool[order.front()];
  Rng refit_rng(derive_seed(seed, Stream::refit, best.pool_index));
  return {std::move(ranking), fitter(best, X, y, refit_rng)};
}

template <class Spec, class Fitter = DefaultFitter>
auto select_surrogate(const std::vector<Spec>& pool, const std::vector<FeatureVector>& X,
                      std::span<const double> y, std::size_t k, std::uint64_t seed,
                      const Fitter& fitter = {}, std::size_t workers = 1) {
  return select_surrogate(std::span<const Spec>(pool), X, y, k, seed, fitter, workers);
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_ranking_csv(std::ostream& os, const SurrogateRanking& ranking,
                              std::span<const SurrogateSpec> pool) {
  os << "pool_index,family,hyper,ratio,selected\n";
  bool first = true;
  for (const auto& e : ranking.entries) {
    const auto it = std::find_if(pool.begin(), pool.end(),
                                 [&](const SurrogateSpec& s) { return s.pool_index == e.pool_index; });
    os << e.pool_index << ',' << (it != pool.end() ? to_string(it->family()) : "?") << ','
       << (it != pool.end() ? it->summary() : "") << ',';
    if (e.failed) os << "failed";
    else os << std::setprecision(17) << e.ratio;
    os << ',' << (first ? 1 : 0) << '\n';
    first = false;
  }
}

inline nlohmann::json to_json(const SurrogateSpec& s) {
  return std::visit(
      [&](const auto& h) -> nlohmann::json {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, ForestParams>)
          return {{"family", "random_forest"}, {"n_trees", h.n_trees},
                  {"max_depth", h.max_depth}, {"min_leaf", h.min_leaf}};
        else if constexpr (std::is_same_v<T, GpParams>)
          return {{"family", "gaussian_process"}, {"length_scale", h.length_scale},
                  {"signal_variance", h.signal_variance}, {"noise_variance", h.noise_variance}};
        else
          return {{"family", "gradient_boosting"}, {"n_rounds", h.n_rounds},
                  {"learning_rate", h.learning_rate}, {"max_depth", h.max_depth},
                  {"min_leaf", h.min_leaf}};
      },
      s.hyper);
}

// Parses a pool: either a bare array of spec objects or an object with a
// "pool" array. Missing fields take the defaults above; "max_depth": null
// means unbounded for forests.
inline std::vector<SurrogateSpec> pool_from_json(const nlohmann::json& doc) {
  const nlohmann::json& arr = doc.is_object() && doc.contains("pool") ? doc["pool"] : doc;
  if (!arr.is_array() || arr.empty())
    throw std::invalid_argument("/pool: expected a non-empty array of surrogate specs");
  std::vector<SurrogateSpec> pool;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& j = arr[i];
    const std::string path = "/pool/" + std::to_string(i);
    if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
      throw std::invalid_argument(path + ": missing string 'family'");
    const auto fam = j["family"].get<std::string>();
    auto num = [&](const char* key, auto fallback) {
      using V = decltype(fallback);
      if (!j.contains(key) || j[key].is_null()) return fallback;
      if (!j[key].is_number()) throw std::invalid_argument(path + "/" + key + ": expected a number");
      return j[key].get<V>();
    };
    SurrogateSpec s;
    if (fam == "random_forest") {
      s.hyper = ForestParams{num("n_trees", std::size_t{64}), num("max_depth", 0),
                             num("min_leaf", std::size_t{2})};
    } else if (fam == "gaussian_process") {
      s.hyper = GpParams{num("length_scale", 0.3), num("signal_variance", 1.0),
                         num("noise_variance", 1e-2)};
    } else if (fam == "gradient_boosting") {
      s.hyper = BoostingParams{num("n_rounds", std::size_t{100}), num("learning_rate", 0.1),
                               num("max_depth", 3), num("min_leaf", std::size_t{1})};
    } else {
      throw std::invalid_argument(path + "/family: unknown family '" + fam + "'");
    }
    s.pool_index = i;
    try {
      s.validate();
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ": " + e.what());
    }
    pool.push_back(std::move(s));
  }
  return pool;
}

}  // namespace dss
