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

// Tunes a toy training-loss surface over a mixed space (log-scale learning
// rate, integer depth, categorical optimizer) and prints which surrogate
// family won each iteration.

#include <cmath>
#include <cstdio>

#include "dss/dss.hpp"

int main() {
  using namespace dss;
  const ConfigSpace space({ParamSpec::continuous("learning_rate", 1e-4, 1.0, Scale::log10),
                           ParamSpec::integer("depth", 1, 12),
                           ParamSpec::categorical("optimizer", {"sgd", "adam", "adagrad"})});

  // Best near lr = 0.03, depth = 6 with adam; sgd and adagrad pay a penalty.
  const Objective loss = [](const Configuration& c, std::uint64_t seed) {
    const double lr = std::log10(c.values[0]) + 1.5;
    const double depth = (c.values[1] - 6.0) / 3.0;
    const double penalty[] = {0.4, 0.0, 0.15};
    Rng rng(seed);
    const double noise = 0.01 * (uniform01(rng) - 0.5);
    return EvalOutcome{lr * lr + depth * depth + penalty[static_cast<int>(c.values[2])] + noise, {}};
  };

  const auto result = run(loss, space, default_pool(), {48}, {}, 2026);

  std::printf("iter  anomaly  selected            cv_ratio  incumbent\n");
  for (const auto& it : result.trace) {
    const char* family = it.selected ? to_string(it.selected->family()) : "-";
    std::printf("%4zu  %-7s  %-18s  %8.4f  %9.4f\n", it.iteration, it.anomaly ? "yes" : "no",
                family, it.selected_ratio, it.incumbent);
  }
  const auto& best = result.best.config.values;
  std::printf("\nbest loss %.4f at learning_rate=%.4g depth=%.0f optimizer=%s\n",
              result.best.score, best[0], best[1],
              space.params()[2].choices[static_cast<std::size_t>(best[2])].c_str());
  return 0;
}
