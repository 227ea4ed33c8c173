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

// Candidate generation against an exploration memory, surrogate ranking,
// and the exploit/explore split of each evaluation batch.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "dss/config_space.hpp"
#include "dss/random.hpp"

namespace dss {

struct CellKey {
  std::vector<int> indices;

  auto operator<=>(const CellKey&) const = default;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (int i : k.indices) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)));
    return static_cast<std::size_t>(h);
  }
};

inline constexpr int kDefaultResolution = 16;

// Numeric parameters: stratum of the scale-normalized value; categoricals:
// the choice index.
inline CellKey cell_key(const ConfigSpace& space, const Configuration& config, int resolution) {
  if (resolution < 1) throw std::invalid_argument("cell_key: resolution must be >= 1");
  CellKey key;
  key.indices.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space[i];
    if (p.is_categorical()) {
      key.indices.push_back(static_cast<int>(config.values[i]));
    } else {
      const double u = to_unit(p, config.values[i]);
      key.indices.push_back(std::min(static_cast<int>(std::floor(u * resolution)), resolution - 1));
    }
  }
  return key;
}

class ExplorationMemory {
 public:
  explicit ExplorationMemory(int resolution = kDefaultResolution) : resolution_(resolution) {
    if (resolution < 1) throw std::invalid_argument("ExplorationMemory: resolution must be >= 1");
  }

  int resolution() const noexcept { return resolution_; }
  std::size_t size() const noexcept { return visited_.size(); }

  bool contains(const CellKey& k) const { return visited_.contains(k); }
  bool contains(const ConfigSpace& s, const Configuration& c) const {
    return contains(cell_key(s, c, resolution_));
  }

  // Returns false if the cell was already visited.
  bool insert(CellKey k) { return visited_.insert(std::move(k)).second; }
  bool insert(const ConfigSpace& s, const Configuration& c) {
    return insert(cell_key(s, c, resolution_));
  }

  std::vector<CellKey> sorted_cells() const {
    std::vector<CellKey> out(visited_.begin(), visited_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  void write_csv(std::ostream& os, const ConfigSpace& space) const {
    for (std::size_t i = 0; i < space.size(); ++i) os << (i ? "," : "") << space[i].name;
    os << '\n';
    for (const auto& k : sorted_cells()) {
      for (std::size_t i = 0; i < k.indices.size(); ++i) os << (i ? "," : "") << k.indices[i];
      os << '\n';
    }
  }

 private:
  int resolution_;
  std::unordered_set<CellKey, CellKeyHash> visited_;
};

struct AcquisitionOptions {
  std::size_t batch_size = 512;
  std::size_t n_batches = 10;
  std::size_t max_attempts = 0;  // 0 = 50 * batch_size
  double exploit_fraction = 0.75;

  std::size_t attempts() const noexcept { return max_attempts ? max_attempts : 50 * batch_size; }
};

// Uniform draws whose cells are neither visited nor already drawn here. Stops
// at batch_size * n_batches candidates or after max_attempts consecutive
// rejections; an empty result means the space is exhausted.
inline std::vector<Configuration> generate_candidates(const ConfigSpace& space,
                                                      const ExplorationMemory& memory,
                                                      std::size_t batch_size, std::size_t n_batches,
                                                      std::size_t max_attempts, Rng& rng) {
  if (batch_size < 1 || n_batches < 1)
    throw std::invalid_argument("generate_candidates: batch_size and n_batches must be >= 1");
  const std::size_t target = batch_size * n_batches;
  std::vector<Configuration> out;
  std::unordered_set<CellKey, CellKeyHash> drawn;
  std::size_t rejections = 0;
  while (out.size() < target && rejections < max_attempts) {
    auto c = sample_uniform(space, rng);
    auto key = cell_key(space, c, memory.resolution());
    if (memory.contains(key) || !drawn.insert(std::move(key)).second) {
      ++rejections;
      continue;
    }
    rejections = 0;
    out.push_back(std::move(c));
  }
  return out;
}

struct RankedCandidate {
  Configuration config;
  double predicted = 0.0;
};

// Ascending predicted score; ties keep generation order.
using RankedCandidates = std::vector<RankedCandidate>;

// Model: anything with predict(const std::vector<FeatureVector>&) -> vector<double>.
template <class Model>
RankedCandidates rank_candidates(const Model& model, const ConfigSpace& space,
                                 const std::vector<Configuration>& candidates,
                                 std::size_t batch_size = 512) {
  if (candidates.empty()) throw std::invalid_argument("rank_candidates: no candidates");
  batch_size = std::max<std::size_t>(batch_size, 1);
  RankedCandidates ranked;
  ranked.reserve(candidates.size());
  std::vector<FeatureVector> batch;
  for (std::size_t start = 0; start < candidates.size(); start += batch_size) {
    const std::size_t stop = std::min(candidates.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < stop; ++i) batch.push_back(encode(space, candidates[i]));
    const std::vector<double> scores = model.predict(batch);
    for (std::size_t i = start; i < stop; ++i) ranked.push_back({candidates[i], scores[i - start]});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.predicted < b.predicted; });
  return ranked;
}

enum class BatchRole { init, exploit, explore };

inline const char* to_string(BatchRole r) {
  switch (r) {
    case BatchRole::init: return "init";
    case BatchRole::exploit: return "exploit";
    case BatchRole::explore: return "explore";
  }
  return "?";
}

struct Proposal {
  Configuration config;
  BatchRole role = BatchRole::explore;
};

// floor(exploit_fraction * n_slots) top-ranked candidates, the rest uniform
// exploration in unvisited cells. Every chosen cell is recorded in memory.
// May return fewer than n_slots when exploration runs out of cells.
inline std::vector<Proposal> allocate_batch(const RankedCandidates& ranked, const ConfigSpace& space,
                                            ExplorationMemory& memory, std::size_t n_slots,
                                            double exploit_fraction, Rng& rng,
                                            std::size_t max_attempts) {
  if (n_slots < 1) throw std::invalid_argument("allocate_batch: n_slots must be >= 1");
  if (!(exploit_fraction >= 0.0 && exploit_fraction <= 1.0))
    throw std::invalid_argument("allocate_batch: exploit_fraction must be in [0, 1]");
  const auto n_exploit =
      static_cast<std::size_t>(std::floor(exploit_fraction * static_cast<double>(n_slots)));

  std::vector<Proposal> out;
  for (const auto& rc : ranked) {
    if (out.size() >= n_exploit) break;
    if (memory.insert(space, rc.config)) out.push_back({rc.config, BatchRole::exploit});
  }
  std::size_t rejections = 0;
  while (out.size() < n_slots && rejections < max_attempts) {
    auto c = sample_uniform(space, rng);
    if (!memory.insert(space, c)) {
      ++rejections;
      continue;
    }
    rejections = 0;
    out.push_back({std::move(c), BatchRole::explore});
  }
  return out;
}

}  // namespace dss
