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

// Field-aware factorization machine: the learning engine being tuned.
//
//   phi(x) = b + sum_i w_i x_i + sum_{i<j} <v_{i,f(j)}, v_{j,f(i)}> x_i x_j
//
// trained on L2-regularized logistic loss with AdaGrad-scaled SGD, and
// evaluated by logloss and relative information gain (RIG).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dss/config_space.hpp"
#include "dss/optimizer.hpp"
#include "dss/random.hpp"

namespace dss::ffm {

struct Feature {
  std::uint32_t field = 0;
  std::uint32_t index = 0;
  double value = 1.0;
};

struct Instance {
  int label = 0;
  std::vector<Feature> features;
};

struct Dataset {
  std::vector<Instance> instances;
  std::size_t n_fields = 0;
  std::size_t n_features = 0;

  std::size_t size() const noexcept { return instances.size(); }
  double positive_rate() const {
    std::size_t pos = 0;
    for (const auto& in : instances) pos += static_cast<std::size_t>(in.label);
    return static_cast<double>(pos) / static_cast<double>(instances.size());
  }
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// libffm text: one instance per line, "label field:feature:value ...".
inline Dataset parse_dataset(std::string_view text) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto parse_uint = [](std::string_view s, std::uint32_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  };
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::istringstream in{std::string(line)};
    std::string tok;
    in >> tok;
    if (tok != "0" && tok != "1") throw DatasetError(line_no, "label must be 0 or 1, got '" + tok + "'");
    Instance inst;
    inst.label = tok == "1";
    while (in >> tok) {
      const auto c1 = tok.find(':');
      const auto c2 = c1 == std::string::npos ? c1 : tok.find(':', c1 + 1);
      if (c2 == std::string::npos)
        throw DatasetError(line_no, "expected field:feature:value, got '" + tok + "'");
      Feature f;
      std::string_view sv(tok);
      if (!parse_uint(sv.substr(0, c1), f.field) ||
          !parse_uint(sv.substr(c1 + 1, c2 - c1 - 1), f.index))
        throw DatasetError(line_no, "bad field or feature index in '" + tok + "'");
      try {
        std::size_t used = 0;
        const std::string val(sv.substr(c2 + 1));
        f.value = std::stod(val, &used);
        if (used != val.size() || !std::isfinite(f.value)) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw DatasetError(line_no, "bad value in '" + tok + "'");
      }
      for (const auto& g : inst.features)
        if (g.field == f.field && g.index == f.index)
          throw DatasetError(line_no, "duplicate field:feature " + std::to_string(f.field) + ":" +
                                          std::to_string(f.index));
      ds.n_fields = std::max<std::size_t>(ds.n_fields, f.field + 1);
      ds.n_features = std::max<std::size_t>(ds.n_features, f.index + 1);
      inst.features.push_back(f);
    }
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) throw DatasetError(0, "empty dataset");
  return ds;
}

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  for (const auto& in : ds.instances) {
    os << in.label;
    for (const auto& f : in.features) os << ' ' << f.field << ':' << f.index << ':' << f.value;
    os << '\n';
  }
}

struct HyperParams {
  double learning_rate = 0.1;
  std::size_t latent_dim = 4;
  double l2_reg = 1e-5;
  std::size_t epochs = 3;

  void validate() const {
    if (!(learning_rate > 0) || latent_dim < 1 || !(l2_reg >= 0) || epochs < 1)
      throw std::invalid_argument("ffm: need learning_rate > 0, latent_dim >= 1, l2_reg >= 0, "
                                  "epochs >= 1");
  }
};

// All weights in one flat vector: [bias | linear(n_features) | latent],
// latent(feature, field) a block of latent_dim entries.
class Model {
 public:
  Model() = default;
  Model(std::size_t n_features, std::size_t n_fields, std::size_t latent_dim)
      : n_features_(n_features), n_fields_(n_fields), k_(latent_dim),
        w_(1 + n_features + n_features * n_fields * latent_dim, 0.0) {}

  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t n_fields() const noexcept { return n_fields_; }
  std::size_t latent_dim() const noexcept { return k_; }

  std::size_t linear_offset(std::size_t feature) const noexcept { return 1 + feature; }
  std::size_t latent_offset(std::size_t feature, std::size_t field) const noexcept {
    return 1 + n_features_ + (feature * n_fields_ + field) * k_;
  }

  double& bias() noexcept { return w_[0]; }
  double bias() const noexcept { return w_[0]; }
  double& linear(std::size_t feature) { return w_[linear_offset(feature)]; }
  std::span<double> latent(std::size_t feature, std::size_t field) {
    return {w_.data() + latent_offset(feature, field), k_};
  }
  std::span<const double> latent(std::size_t feature, std::size_t field) const {
    return {w_.data() + latent_offset(feature, field), k_};
  }

  std::vector<double>& weights() noexcept { return w_; }
  const std::vector<double>& weights() const noexcept { return w_; }

  void check(const Instance& in) const {
    for (const auto& f : in.features)
      if (f.field >= n_fields_ || f.index >= n_features_)
        throw std::out_of_range("ffm: feature " + std::to_string(f.field) + ":" +
                                std::to_string(f.index) + " outside model dimensions");
  }

 private:
  std::size_t n_features_ = 0;
  std::size_t n_fields_ = 0;
  std::size_t k_ = 0;
  std::vector<double> w_;
};

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline constexpr double kProbabilityClip = 1e-12;

inline double clipped_logloss(int label, double p) {
  p = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

// ln(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double phi(const Model& m, const Instance& in) {
  double s = m.bias();
  const auto& fs = in.features;
  for (const auto& f : fs) s += m.weights()[m.linear_offset(f.index)] * f.value;
  const std::size_t k = m.latent_dim();
  for (std::size_t a = 0; a < fs.size(); ++a) {
    for (std::size_t b = a + 1; b < fs.size(); ++b) {
      const auto va = m.latent(fs[a].index, fs[b].field);
      const auto vb = m.latent(fs[b].index, fs[a].field);
      double dot = 0.0;
      for (std::size_t d = 0; d < k; ++d) dot += va[d] * vb[d];
      s += dot * fs[a].value * fs[b].value;
    }
  }
  return s;
}

inline double predict(const Model& m, const Instance& in) {
  m.check(in);
  return sigmoid(phi(m, in));
}

// Sparse gradient accumulator over the flat weight vector.
class GradientBuffer {
 public:
  void resize(std::size_t n) {
    dense_.assign(n, 0.0);
    mark_.assign(n, 0);
    touched_.clear();
  }
  void add(std::size_t c, double g) {
    if (!mark_[c]) {
      mark_[c] = 1;
      touched_.push_back(c);
    }
    dense_[c] += g;
  }
  void clear() {
    for (auto c : touched_) {
      dense_[c] = 0.0;
      mark_[c] = 0;
    }
    touched_.clear();
  }
  const std::vector<std::size_t>& touched() const noexcept { return touched_; }
  double operator[](std::size_t c) const { return dense_[c]; }

 private:
  std::vector<double> dense_;
  std::vector<char> mark_;
  std::vector<std::size_t> touched_;
};

// Per-instance objective: logistic loss of phi plus (l2/2)*w^2 over every
// weight the instance touches (linear and latent; the bias is not
// regularized). Fills `g` with its gradient and returns the objective value.
inline double instance_gradient(const Model& m, const Instance& in, double l2, GradientBuffer& g) {
  g.clear();
  const double z = phi(m, in);
  const double y = in.label;
  const double dz = sigmoid(z) - y;
  double loss = softplus(z) - y * z;

  const auto& w = m.weights();
  const auto& fs = in.features;
  const std::size_t k = m.latent_dim();
  g.add(0, dz);
  for (const auto& f : fs) g.add(m.linear_offset(f.index), dz * f.value);
  for (std::size_t a = 0; a < fs.size(); ++a) {
    for (std::size_t b = a + 1; b < fs.size(); ++b) {
      const std::size_t oa = m.latent_offset(fs[a].index, fs[b].field);
      const std::size_t ob = m.latent_offset(fs[b].index, fs[a].field);
      const double scale = dz * fs[a].value * fs[b].value;
      for (std::size_t d = 0; d < k; ++d) {
        g.add(oa + d, scale * w[ob + d]);
        g.add(ob + d, scale * w[oa + d]);
      }
    }
  }
  if (l2 > 0) {
    for (auto c : g.touched()) {
      if (c == 0) continue;
      loss += 0.5 * l2 * w[c] * w[c];
      g.add(c, l2 * w[c]);
    }
  }
  return loss;
}

// Objective value only (the same function instance_gradient differentiates).
inline double instance_objective(const Model& m, const Instance& in, double l2) {
  GradientBuffer g;
  g.resize(m.weights().size());
  return instance_gradient(m, in, l2, g);
}

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero bias and linear weights; latent uniform in [0, 1/sqrt(k)).
inline Model initial_model(std::size_t n_features, std::size_t n_fields, std::size_t latent_dim,
                           Rng& rng) {
  Model m(n_features, n_fields, latent_dim);
  std::uniform_real_distribution<double> u(0.0, 1.0 / std::sqrt(static_cast<double>(latent_dim)));
  auto& w = m.weights();
  for (std::size_t c = 1 + n_features; c < w.size(); ++c) w[c] = u(rng);
  return m;
}

struct TrainStats {
  double final_objective = 0.0;  // mean regularized objective over the last epoch
  double train_logloss = 0.0;    // clipped logloss of the trained model on the training set
};

// AdaGrad SGD from `model`; instance order reshuffled each epoch with rng.
inline TrainStats train_from(Model& model, const Dataset& ds, const HyperParams& hp, Rng& rng) {
  hp.validate();
  if (ds.instances.empty()) throw std::invalid_argument("ffm: empty dataset");
  for (const auto& in : ds.instances) model.check(in);
  auto& w = model.weights();
  std::vector<double> G(w.size(), 1.0);
  GradientBuffer g;
  g.resize(w.size());
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainStats stats;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (auto i : order) {
      total += instance_gradient(model, ds.instances[i], hp.l2_reg, g);
      for (auto c : g.touched()) {
        const double gc = g[c];
        G[c] += gc * gc;
        w[c] -= hp.learning_rate * gc / std::sqrt(G[c]);
      }
    }
    stats.final_objective = total / static_cast<double>(ds.size());
    const bool finite = std::isfinite(stats.final_objective) &&
                        std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); });
    if (!finite) {
      std::ostringstream os;
      os << "ffm training diverged at epoch " << epoch + 1 << " (learning_rate=" << hp.learning_rate
         << ", latent_dim=" << hp.latent_dim << ", l2_reg=" << hp.l2_reg
         << ", epochs=" << hp.epochs << ")";
      throw TrainingDiverged(os.str());
    }
  }
  double ll = 0.0;
  for (const auto& in : ds.instances) ll += clipped_logloss(in.label, sigmoid(phi(model, in)));
  stats.train_logloss = ll / static_cast<double>(ds.size());
  return stats;
}

inline Model train(const Dataset& ds, const HyperParams& hp, Rng& rng,
                   TrainStats* stats = nullptr) {
  hp.validate();
  Model m = initial_model(ds.n_features, ds.n_fields, hp.latent_dim, rng);
  const auto s = train_from(m, ds, hp, rng);
  if (stats) *stats = s;
  return m;
}

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  double logloss = 0.0;
  double rig = 0.0;
  double base_rate = 0.0;
  double base_entropy = 0.0;  // logloss of the constant base-rate predictor
};

inline Metrics evaluate_probabilities(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size() || labels.empty())
    throw std::invalid_argument("evaluate: labels/probabilities size mismatch");
  Metrics m;
  std::size_t pos = 0;
  for (int l : labels) pos += static_cast<std::size_t>(l != 0);
  if (pos == 0 || pos == labels.size())
    throw std::domain_error("evaluate: RIG undefined on a single-class dataset");
  const double n = static_cast<double>(labels.size());
  m.base_rate = static_cast<double>(pos) / n;
  double ll = 0.0, h = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ll += clipped_logloss(labels[i], probs[i]);
    h += clipped_logloss(labels[i], m.base_rate);
  }
  m.logloss = ll / n;
  m.base_entropy = h / n;
  m.rig = 1.0 - m.logloss / m.base_entropy;
  return m;
}

inline Metrics evaluate(const Model& model, const Dataset& ds) {
  std::vector<int> labels;
  std::vector<double> probs;
  labels.reserve(ds.size());
  probs.reserve(ds.size());
  for (const auto& in : ds.instances) {
    labels.push_back(in.label);
    probs.push_back(predict(model, in));
  }
  return evaluate_probabilities(labels, probs);
}

// ---------------------------------------------------------------------------
// Synthetic CTR data

struct GeneratorOptions {
  std::size_t n_train = 50000;
  std::size_t n_valid = 10000;
  std::size_t n_fields = 5;
  std::size_t features_per_field = 20;
  double noise = 0.5;
};

struct SyntheticData {
  Dataset train;
  Dataset valid;
  Model ground_truth;
};

inline constexpr std::size_t kGroundTruthLatentDim = 4;

// Ground truth: every weight ~ N(0, 1) / sqrt(4), latent_dim 4. Each instance
// activates one uniformly chosen feature per field with value 1, and its
// label is Bernoulli(sigmoid(phi + noise * eps)), eps ~ N(0, 1).
inline SyntheticData generate_ctr_data(std::uint64_t gen_seed, const GeneratorOptions& opt) {
  if (opt.n_train < 1 || opt.n_valid < 1 || opt.n_fields < 1 || opt.features_per_field < 1 ||
      !(opt.noise >= 0))
    throw std::invalid_argument("generate_ctr_data: counts must be >= 1 and noise >= 0");
  Rng rng(gen_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n_features = opt.n_fields * opt.features_per_field;
  SyntheticData out;
  out.ground_truth = Model(n_features, opt.n_fields, kGroundTruthLatentDim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kGroundTruthLatentDim));
  for (auto& w : out.ground_truth.weights()) w = normal(rng) * scale;

  std::uniform_int_distribution<std::size_t> pick(0, opt.features_per_field - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto make = [&](std::size_t n) {
    Dataset ds;
    ds.n_fields = opt.n_fields;
    ds.n_features = n_features;
    ds.instances.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Instance in;
      for (std::size_t f = 0; f < opt.n_fields; ++f)
        in.features.push_back({static_cast<std::uint32_t>(f),
                               static_cast<std::uint32_t>(f * opt.features_per_field + pick(rng)),
                               1.0});
      const double z = phi(out.ground_truth, in) + opt.noise * normal(rng);
      in.label = unif(rng) < sigmoid(z) ? 1 : 0;
      ds.instances.push_back(std::move(in));
    }
    return ds;
  };
  out.train = make(opt.n_train);
  out.valid = make(opt.n_valid);
  return out;
}

// ---------------------------------------------------------------------------
// Objective adapter

// learning_rate log10 [1e-3, 1], latent_dim [2, 32], l2_reg log10 [1e-6, 1e-1],
// epochs [1, 10].
inline ConfigSpace tuning_space() {
  return ConfigSpace({ParamSpec::continuous("learning_rate", 1e-3, 1.0, Scale::log10),
                      ParamSpec::integer("latent_dim", 2, 32),
                      ParamSpec::continuous("l2_reg", 1e-6, 1e-1, Scale::log10),
                      ParamSpec::integer("epochs", 1, 10)});
}

inline HyperParams bind(const ConfigSpace& space, const Configuration& c) {
  space.require(c);
  HyperParams hp;
  hp.learning_rate = c.values[space.index_of("learning_rate")];
  hp.latent_dim = static_cast<std::size_t>(c.values[space.index_of("latent_dim")]);
  hp.l2_reg = c.values[space.index_of("l2_reg")];
  hp.epochs = static_cast<std::size_t>(c.values[space.index_of("epochs")]);
  return hp;
}

// Trains on `train`, scores -RIG on `valid` (lower is better). Divergence
// propagates as an exception, which the optimizer records as a failure.
inline Objective make_objective(std::shared_ptr<const Dataset> train,
                                std::shared_ptr<const Dataset> valid,
                                ConfigSpace space = tuning_space()) {
  return [train = std::move(train), valid = std::move(valid), space = std::move(space)](
             const Configuration& c, std::uint64_t seed) {
    const HyperParams hp = bind(space, c);
    Rng rng(seed);
    TrainStats stats;
    const Model m = ffm::train(*train, hp, rng, &stats);
    const Metrics v = evaluate(m, *valid);
    EvalOutcome o;
    o.score = -v.rig;
    o.meta = {{"train_logloss", stats.train_logloss},
              {"valid_logloss", v.logloss},
              {"valid_rig", v.rig}};
    return o;
  };
}

}  // namespace dss::ffm
