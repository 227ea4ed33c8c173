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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dss/config_space.hpp"
#include "dss/optimizer.hpp"

namespace dss {

struct SyntheticObjective {
  std::string name;
  ConfigSpace space;
  std::function<double(const Configuration&)> eval;
};

inline double synthetic_eval(const SyntheticObjective& obj, const Configuration& c) {
  if (!obj.space.contains(c))
    throw std::out_of_range(obj.name + ": configuration outside of the objective's domain");
  return obj.eval(c);
}

// The seed is ignored: synthetic objectives are deterministic.
inline Objective as_objective(SyntheticObjective obj) {
  return [obj = std::move(obj)](const Configuration& c, std::uint64_t) {
    return EvalOutcome{synthetic_eval(obj, c), {}};
  };
}

inline double branin_value(double x1, double x2) {
  constexpr double pi = std::numbers::pi;
  constexpr double a = 1.0;
  constexpr double b = 5.1 / (4.0 * pi * pi);
  constexpr double c = 5.0 / pi;
  constexpr double r = 6.0;
  constexpr double s = 10.0;
  constexpr double t = 1.0 / (8.0 * pi);
  const double q = x2 - b * x1 * x1 + c * x1 - r;
  return a * q * q + s * (1.0 - t) * std::cos(x1) + s;
}

// x1 in [-5, 10], x2 in [0, 15]; three global minima of ~0.397887.
inline SyntheticObjective branin() {
  return {"branin",
          ConfigSpace({ParamSpec::continuous("x1", -5.0, 10.0),
                       ParamSpec::continuous("x2", 0.0, 15.0)}),
          [](const Configuration& c) { return branin_value(c.values[0], c.values[1]); }};
}

// Sum over both coordinates of (x^4 - 16x^2 + 5x) / 2 on [-5, 5]^2.
inline SyntheticObjective styblinski_tang_2d() {
  return {"styblinski_tang_2d",
          ConfigSpace({ParamSpec::continuous("x1", -5.0, 5.0),
                       ParamSpec::continuous("x2", -5.0, 5.0)}),
          [](const Configuration& c) {
            double s = 0.0;
            for (double x : c.values) s += x * x * x * x - 16.0 * x * x + 5.0 * x;
            return 0.5 * s;
          }};
}

// Rectangular grid of values; evaluated by bilinear interpolation.
struct LandscapeGrid {
  std::vector<double> x1;      // ascending
  std::vector<double> x2;      // ascending
  std::vector<double> values;  // values[i * x2.size() + j] at (x1[i], x2[j])

  double at(std::size_t i, std::size_t j) const { return values[i * x2.size() + j]; }

  double interpolate(double a, double b) const {
    auto locate = [](const std::vector<double>& axis, double v, std::size_t& cell, double& t) {
      auto it = std::upper_bound(axis.begin(), axis.end(), v);
      std::size_t hi = static_cast<std::size_t>(it - axis.begin());
      hi = std::clamp<std::size_t>(hi, 1, axis.size() - 1);
      cell = hi - 1;
      t = (v - axis[cell]) / (axis[hi] - axis[cell]);
    };
    std::size_t i = 0, j = 0;
    double tx = 0.0, ty = 0.0;
    locate(x1, a, i, tx);
    locate(x2, b, j, ty);
    return at(i, j) * (1 - tx) * (1 - ty) + at(i + 1, j) * tx * (1 - ty) +
           at(i, j + 1) * (1 - tx) * ty + at(i + 1, j + 1) * tx * ty;
  }
};

// CSV with header "x1,x2,value"; rows may come in any order but must cover
// a full rectangular grid exactly once.
inline LandscapeGrid parse_landscape_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("landscape csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x1,x2,value") throw std::invalid_argument("landscape csv: header must be x1,x2,value");
  std::map<std::pair<double, double>, double> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, v;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, v))
      throw std::invalid_argument("landscape csv: line " + std::to_string(line_no) +
                                  ": expected 3 columns");
    try {
      const double x = std::stod(a), y = std::stod(b), z = std::stod(v);
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) throw std::invalid_argument("");
      if (!cells.emplace(std::make_pair(x, y), z).second)
        throw std::invalid_argument("landscape csv: line " + std::to_string(line_no) +
                                    ": duplicate node");
    } catch (const std::invalid_argument& e) {
      if (std::string(e.what()).find("duplicate") != std::string::npos) throw;
      throw std::invalid_argument("landscape csv: line " + std::to_string(line_no) +
                                  ": non-numeric value");
    }
  }
  LandscapeGrid g;
  for (const auto& [xy, _] : cells) {
    if (g.x1.empty() || g.x1.back() != xy.first) g.x1.push_back(xy.first);
    g.x2.push_back(xy.second);
  }
  std::sort(g.x2.begin(), g.x2.end());
  g.x2.erase(std::unique(g.x2.begin(), g.x2.end()), g.x2.end());
  if (g.x1.size() < 2 || g.x2.size() < 2 || cells.size() != g.x1.size() * g.x2.size())
    throw std::invalid_argument("landscape csv: nodes do not form a full grid of at least 2x2");
  g.values.reserve(cells.size());
  for (const auto& [_, z] : cells) g.values.push_back(z);  // map order is (x1, x2) row-major
  return g;
}

inline SyntheticObjective interpolated_grid(LandscapeGrid grid) {
  ConfigSpace space({ParamSpec::continuous("x1", grid.x1.front(), grid.x1.back()),
                     ParamSpec::continuous("x2", grid.x2.front(), grid.x2.back())});
  auto g = std::make_shared<const LandscapeGrid>(std::move(grid));
  return {"interpolated_grid", std::move(space),
          [g](const Configuration& c) { return g->interpolate(c.values[0], c.values[1]); }};
}

// ---------------------------------------------------------------------------
// Exhaustive grid oracle

struct GridOracle {
  std::size_t resolution = 0;
  Configuration best_config;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<std::pair<Configuration, double>> grid_values;  // first parameter outermost
};

// Grid nodes of one parameter: `resolution` points uniform on its encoded
// scale, bounds included (all choices for categoricals).
inline std::vector<double> grid_axis(const ParamSpec& p, std::size_t resolution) {
  std::vector<double> axis;
  if (p.is_categorical()) {
    for (std::size_t c = 0; c < p.choices.size(); ++c) axis.push_back(static_cast<double>(c));
    return axis;
  }
  for (std::size_t i = 0; i < resolution; ++i)
    axis.push_back(from_unit(p, static_cast<double>(i) / static_cast<double>(resolution - 1)));
  return axis;
}

inline GridOracle grid_oracle(const SyntheticObjective& obj, std::size_t resolution) {
  if (resolution < 2) throw std::invalid_argument("grid_oracle: resolution must be >= 2");
  const std::size_t d = obj.space.size();
  if (d > 3) throw std::invalid_argument("grid_oracle: at most 3 dimensions");
  std::vector<std::vector<double>> axes;
  std::size_t total = 1;
  for (const auto& p : obj.space.params()) {
    axes.push_back(grid_axis(p, resolution));
    total *= axes.back().size();
  }
  GridOracle o;
  o.resolution = resolution;
  o.grid_values.resize(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t n = 0; n < total; ++n) {
    Configuration c;
    for (std::size_t k = 0; k < d; ++k) c.values.push_back(axes[k][idx[k]]);
    const double v = synthetic_eval(obj, c);
    if (v < o.best_value) {
      o.best_value = v;
      o.best_config = c;
    }
    o.grid_values[n] = {std::move(c), v};
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < axes[k].size()) break;
      idx[k] = 0;
    }
  }
  return o;
}

// "x1,x2,value" for a two-parameter objective, x1 outermost.
inline void write_landscape_csv(std::ostream& os, const GridOracle& oracle) {
  os << "x1,x2,value\n" << std::setprecision(17);
  for (const auto& [c, v] : oracle.grid_values) {
    if (c.values.size() != 2) throw std::invalid_argument("landscape: objective must be 2-D");
    os << c.values[0] << ',' << c.values[1] << ',' << v << '\n';
  }
}

}  // namespace dss
