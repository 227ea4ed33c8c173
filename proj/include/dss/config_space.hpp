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

// Hyperparameter search spaces: declaration, validation, sampling and the
// [0, 1] feature encoding consumed by every surrogate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dss/random.hpp"

namespace dss {

enum class ParamKind { continuous, integer, categorical };
enum class Scale { linear, log10 };

inline const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::continuous: return "continuous";
    case ParamKind::integer: return "integer";
    case ParamKind::categorical: return "categorical";
  }
  return "?";
}

inline const char* to_string(Scale s) { return s == Scale::log10 ? "log10" : "linear"; }

class SpaceError : public std::runtime_error {
 public:
  enum class Kind { schema, duplicate_name, invalid_bounds, invalid_choices, invalid_scale };

  SpaceError(Kind kind, std::string param, const std::string& what)
      : std::runtime_error(what), kind_(kind), param_(std::move(param)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& param() const noexcept { return param_; }

 private:
  Kind kind_;
  std::string param_;
};

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::continuous;
  double low = 0.0;
  double high = 1.0;
  std::vector<std::string> choices;
  Scale scale = Scale::linear;

  static ParamSpec continuous(std::string name, double low, double high,
                              Scale scale = Scale::linear) {
    return {std::move(name), ParamKind::continuous, low, high, {}, scale};
  }
  static ParamSpec integer(std::string name, long low, long high, Scale scale = Scale::linear) {
    return {std::move(name), ParamKind::integer, static_cast<double>(low),
            static_cast<double>(high), {}, scale};
  }
  static ParamSpec categorical(std::string name, std::vector<std::string> choices) {
    return {std::move(name), ParamKind::categorical, 0.0, 0.0, std::move(choices), Scale::linear};
  }

  bool is_categorical() const noexcept { return kind == ParamKind::categorical; }

  // Number of encoded feature components.
  std::size_t width() const noexcept { return is_categorical() ? choices.size() : 1; }

  void validate() const {
    using K = SpaceError::Kind;
    if (name.empty()) throw SpaceError(K::schema, name, "parameter name must be non-empty");
    if (is_categorical()) {
      std::set<std::string> distinct(choices.begin(), choices.end());
      if (choices.size() < 2 || distinct.size() != choices.size())
        throw SpaceError(K::invalid_choices, name,
                         "categorical '" + name + "' needs >= 2 distinct choices");
      return;
    }
    if (!std::isfinite(low) || !std::isfinite(high))
      throw SpaceError(K::invalid_bounds, name, "bounds of '" + name + "' must be finite");
    if (kind == ParamKind::continuous && !(low < high))
      throw SpaceError(K::invalid_bounds, name, "'" + name + "' needs low < high");
    if (kind == ParamKind::integer &&
        (low > high || low != std::floor(low) || high != std::floor(high)))
      throw SpaceError(K::invalid_bounds, name,
                       "'" + name + "' needs integral bounds with low <= high");
    if (scale == Scale::log10 && !(low > 0.0))
      throw SpaceError(K::invalid_scale, name, "log10 scale on '" + name + "' needs low > 0");
  }
};

// Value on the parameter's own scale (identity or log10).
inline double to_scale(const ParamSpec& p, double v) {
  return p.scale == Scale::log10 ? std::log10(v) : v;
}

inline double from_scale(const ParamSpec& p, double s) {
  return p.scale == Scale::log10 ? std::pow(10.0, s) : s;
}

// Min-max normalized position of a numeric value on its scale, in [0, 1].
inline double to_unit(const ParamSpec& p, double v) {
  const double lo = to_scale(p, p.low);
  const double hi = to_scale(p, p.high);
  if (hi == lo) return 0.0;
  return std::clamp((to_scale(p, v) - lo) / (hi - lo), 0.0, 1.0);
}

// Inverse of to_unit. Integers round half-up and clamp to bounds.
inline double from_unit(const ParamSpec& p, double u) {
  const double lo = to_scale(p, p.low);
  const double hi = to_scale(p, p.high);
  double v = from_scale(p, lo + u * (hi - lo));
  if (p.kind == ParamKind::integer) v = std::floor(v + 0.5);
  return std::clamp(v, p.low, p.high);
}

// A point in the space. Integer and categorical entries hold integral values
// (the choice index for categoricals); the owning space gives the meaning.
struct Configuration {
  std::vector<double> values;

  bool operator==(const Configuration&) const = default;
};

using FeatureVector = std::vector<double>;

class ConfigSpace {
 public:
  ConfigSpace() = default;
  explicit ConfigSpace(std::vector<ParamSpec> params) : params_(std::move(params)) {
    std::set<std::string> seen;
    for (const auto& p : params_) {
      p.validate();
      if (!seen.insert(p.name).second)
        throw SpaceError(SpaceError::Kind::duplicate_name, p.name,
                         "duplicate parameter name '" + p.name + "'");
    }
  }

  const std::vector<ParamSpec>& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  const ParamSpec& operator[](std::size_t i) const { return params_[i]; }

  std::size_t encoded_dim() const noexcept {
    std::size_t d = 0;
    for (const auto& p : params_) d += p.width();
    return d;
  }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return i;
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  }

  bool contains(const Configuration& c) const {
    if (c.values.size() != params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& p = params_[i];
      const double v = c.values[i];
      if (!std::isfinite(v)) return false;
      if (p.is_categorical()) {
        if (v != std::floor(v) || v < 0 || v >= static_cast<double>(p.choices.size()))
          return false;
      } else {
        if (v < p.low || v > p.high) return false;
        if (p.kind == ParamKind::integer && v != std::floor(v)) return false;
      }
    }
    return true;
  }

  void require(const Configuration& c) const {
    if (!contains(c)) throw std::invalid_argument("configuration outside of search space");
  }

 private:
  std::vector<ParamSpec> params_;
};

// ---------------------------------------------------------------------------
// JSON schema:
//   {"params": [{"name": "lr", "kind": "continuous", "low": 1e-4, "high": 0.1,
//                "scale": "log10"},
//               {"name": "opt", "kind": "categorical", "choices": ["sgd", "adagrad"]}]}
// Errors carry the JSON path of the offending entry.

namespace detail {

inline std::string with_path(const std::string& path, const std::string& msg) {
  return path + ": " + msg;
}

inline ParamSpec param_from_json(const nlohmann::json& j, const std::string& path) {
  using K = SpaceError::Kind;
  if (!j.is_object()) throw SpaceError(K::schema, "", with_path(path, "expected an object"));
  if (!j.contains("name") || !j["name"].is_string())
    throw SpaceError(K::schema, "", with_path(path + "/name", "missing string 'name'"));
  ParamSpec p;
  p.name = j["name"].get<std::string>();
  if (!j.contains("kind") || !j["kind"].is_string())
    throw SpaceError(K::schema, p.name, with_path(path + "/kind", "missing string 'kind'"));
  const auto kind = j["kind"].get<std::string>();
  if (kind == "continuous") p.kind = ParamKind::continuous;
  else if (kind == "integer") p.kind = ParamKind::integer;
  else if (kind == "categorical") p.kind = ParamKind::categorical;
  else
    throw SpaceError(K::schema, p.name, with_path(path + "/kind", "unknown kind '" + kind + "'"));

  if (p.is_categorical()) {
    if (j.contains("low") || j.contains("high"))
      throw SpaceError(K::schema, p.name,
                       with_path(path, "categorical '" + p.name + "' must not declare bounds"));
    if (!j.contains("choices") || !j["choices"].is_array())
      throw SpaceError(K::schema, p.name, with_path(path + "/choices", "missing array 'choices'"));
    for (std::size_t i = 0; i < j["choices"].size(); ++i) {
      const auto& c = j["choices"][i];
      if (!c.is_string())
        throw SpaceError(K::schema, p.name,
                         with_path(path + "/choices/" + std::to_string(i), "expected a string"));
      p.choices.push_back(c.get<std::string>());
    }
  } else {
    for (const char* key : {"low", "high"}) {
      if (!j.contains(key) || !j[key].is_number())
        throw SpaceError(K::schema, p.name,
                         with_path(path + "/" + key, std::string("missing number '") + key + "'"));
    }
    p.low = j["low"].get<double>();
    p.high = j["high"].get<double>();
  }
  if (j.contains("scale")) {
    const auto& s = j["scale"];
    if (!s.is_string() || (s != "linear" && s != "log10"))
      throw SpaceError(K::schema, p.name,
                       with_path(path + "/scale", "scale must be \"linear\" or \"log10\""));
    p.scale = s == "log10" ? Scale::log10 : Scale::linear;
    if (p.is_categorical() && p.scale == Scale::log10)
      throw SpaceError(K::invalid_scale, p.name,
                       with_path(path + "/scale", "log10 scale on categorical '" + p.name + "'"));
  }
  try {
    p.validate();
  } catch (const SpaceError& e) {
    throw SpaceError(e.kind(), e.param(), with_path(path, e.what()));
  }
  return p;
}

}  // namespace detail

inline ConfigSpace space_from_json(const nlohmann::json& doc) {
  using K = SpaceError::Kind;
  if (!doc.is_object() || !doc.contains("params") || !doc["params"].is_array())
    throw SpaceError(K::schema, "", "/params: expected an array of parameter objects");
  std::vector<ParamSpec> params;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc["params"].size(); ++i) {
    const std::string path = "/params/" + std::to_string(i);
    auto p = detail::param_from_json(doc["params"][i], path);
    if (!seen.insert(p.name).second)
      throw SpaceError(K::duplicate_name, p.name,
                       path + "/name: duplicate parameter name '" + p.name + "'");
    params.push_back(std::move(p));
  }
  if (params.empty()) throw SpaceError(K::schema, "", "/params: at least one parameter required");
  return ConfigSpace(std::move(params));
}

inline ConfigSpace parse_space(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpaceError(SpaceError::Kind::schema, "", std::string("invalid JSON: ") + e.what());
  }
  return space_from_json(doc);
}

inline nlohmann::json to_json(const ConfigSpace& space) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : space.params()) {
    nlohmann::json j{{"name", p.name}, {"kind", to_string(p.kind)}};
    if (p.is_categorical()) {
      j["choices"] = p.choices;
    } else {
      j["low"] = p.low;
      j["high"] = p.high;
      j["scale"] = to_string(p.scale);
    }
    params.push_back(std::move(j));
  }
  return {{"params", std::move(params)}};
}

// ---------------------------------------------------------------------------
// Sampling

inline Configuration sample_uniform(const ConfigSpace& space, Rng& rng) {
  Configuration c;
  c.values.reserve(space.size());
  for (const auto& p : space.params()) {
    if (p.is_categorical()) {
      std::uniform_int_distribution<std::size_t> pick(0, p.choices.size() - 1);
      c.values.push_back(static_cast<double>(pick(rng)));
    } else {
      c.values.push_back(from_unit(p, uniform01(rng)));
    }
  }
  return c;
}

// Latin hypercube design: numeric parameters get one sample per
// equal-probability stratum on their scale, permuted independently per
// parameter; categoricals are assigned round-robin then shuffled.
inline std::vector<Configuration> latin_hypercube_init(const ConfigSpace& space, std::size_t n,
                                                       Rng& rng) {
  if (n == 0) throw std::invalid_argument("latin_hypercube_init: n must be >= 1");
  std::vector<Configuration> out(n);
  for (auto& c : out) c.values.resize(space.size());
  std::vector<std::size_t> order(n);
  for (std::size_t d = 0; d < space.size(); ++d) {
    const auto& p = space[d];
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (p.is_categorical()) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < n; ++i)
        out[order[i]].values[d] = static_cast<double>(i % p.choices.size());
    } else {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(order[i]) + uniform01(rng)) / static_cast<double>(n);
        out[i].values[d] = from_unit(p, std::min(u, 1.0));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding

inline FeatureVector encode(const ConfigSpace& space, const Configuration& config) {
  if (!space.contains(config)) throw std::out_of_range("encode: configuration out of bounds");
  FeatureVector f;
  f.reserve(space.encoded_dim());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space[i];
    if (p.is_categorical()) {
      const auto hot = static_cast<std::size_t>(config.values[i]);
      for (std::size_t c = 0; c < p.choices.size(); ++c) f.push_back(c == hot ? 1.0 : 0.0);
    } else {
      f.push_back(to_unit(p, config.values[i]));
    }
  }
  return f;
}

// Inverse of encode (argmax for one-hot blocks).
inline Configuration decode(const ConfigSpace& space, const FeatureVector& f) {
  if (f.size() != space.encoded_dim()) throw std::invalid_argument("decode: dimension mismatch");
  Configuration c;
  std::size_t at = 0;
  for (const auto& p : space.params()) {
    if (p.is_categorical()) {
      auto first = f.begin() + static_cast<std::ptrdiff_t>(at);
      auto best = std::max_element(first, first + static_cast<std::ptrdiff_t>(p.choices.size()));
      c.values.push_back(static_cast<double>(best - first));
    } else {
      c.values.push_back(from_unit(p, f[at]));
    }
    at += p.width();
  }
  return c;
}

}  // namespace dss
