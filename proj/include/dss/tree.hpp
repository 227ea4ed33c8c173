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
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dss/config_space.hpp"
#include "dss/random.hpp"

namespace dss {

struct TreeOptions {
  int max_depth = 0;              // 0 = unbounded
  std::size_t min_leaf = 1;
  std::size_t max_features = 0;   // features tried per split; 0 = all
};

// CART regression tree with variance-reduction splits.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  // Fits on X[rows] (rows may repeat, e.g. a bootstrap sample). `rng` is only
  // consulted when options.max_features restricts the features per split.
  static RegressionTree fit(const std::vector<FeatureVector>& X, std::span<const double> y,
                            std::span<const std::size_t> rows, const TreeOptions& options,
                            Rng* rng = nullptr) {
    if (rows.empty()) throw std::invalid_argument("RegressionTree: no rows");
    RegressionTree tree;
    Builder b{X, y, options, rng, tree.nodes_, {}};
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    b.grow(idx, 0);
    return tree;
  }

  static RegressionTree fit(const std::vector<FeatureVector>& X, std::span<const double> y,
                            const TreeOptions& options, Rng* rng = nullptr) {
    std::vector<std::size_t> rows(X.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return fit(X, y, rows, options, rng);
  }

  double predict(std::span<const double> x) const {
    int at = 0;
    while (nodes_[at].feature >= 0) {
      const auto& n = nodes_[at];
      at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[at].value;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // sum_l^2/n_l + sum_r^2/n_r, larger is better
  };

  struct Builder {
    const std::vector<FeatureVector>& X;
    std::span<const double> y;
    const TreeOptions& opt;
    Rng* rng;
    std::vector<Node>& nodes;
    std::vector<std::size_t> scratch;

    int grow(std::vector<std::size_t>& idx, int depth) {
      const int id = static_cast<int>(nodes.size());
      nodes.push_back({});
      double sum = 0.0;
      for (auto i : idx) sum += y[i];
      const double n = static_cast<double>(idx.size());
      nodes[id].value = sum / n;

      const bool depth_ok = opt.max_depth <= 0 || depth < opt.max_depth;
      const std::size_t min_leaf = std::max<std::size_t>(opt.min_leaf, 1);
      if (!depth_ok || idx.size() < 2 * min_leaf) return id;

      double sse = 0.0;
      for (auto i : idx) sse += (y[i] - nodes[id].value) * (y[i] - nodes[id].value);
      if (sse <= 1e-14 * std::max(1.0, n)) return id;

      const Split s = best_split(idx, sum, min_leaf);
      // Parent "score" is sum^2/n; a split must improve it strictly.
      const double gain = s.score - sum * sum / n;
      if (s.feature < 0 || !(gain > 1e-12 * std::max(1.0, sse))) return id;

      std::vector<std::size_t> left, right;
      for (auto i : idx)
        (X[i][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(i);
      nodes[id].feature = s.feature;
      nodes[id].threshold = s.threshold;
      const int l = grow(left, depth + 1);
      const int r = grow(right, depth + 1);
      nodes[id].left = l;
      nodes[id].right = r;
      return id;
    }

    std::vector<std::size_t> candidate_features() {
      const std::size_t d = X.front().size();
      std::vector<std::size_t> feats(d);
      std::iota(feats.begin(), feats.end(), std::size_t{0});
      if (opt.max_features > 0 && opt.max_features < d) {
        if (rng == nullptr) throw std::logic_error("feature subsampling requires an rng");
        // Partial Fisher-Yates, then restore ascending order for the tie rule.
        for (std::size_t i = 0; i < opt.max_features; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, d - 1);
          std::swap(feats[i], feats[pick(*rng)]);
        }
        feats.resize(opt.max_features);
        std::sort(feats.begin(), feats.end());
      }
      return feats;
    }

    // Ties go to the lowest feature index, then the lowest threshold.
    Split best_split(const std::vector<std::size_t>& idx, double total, std::size_t min_leaf) {
      Split best;
      bool found = false;
      const std::size_t n = idx.size();
      for (std::size_t f : candidate_features()) {
        scratch = idx;
        std::sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) {
          return X[a][f] < X[b][f];
        });
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          left_sum += y[scratch[i]];
          const std::size_t nl = i + 1;
          const std::size_t nr = n - nl;
          const double xa = X[scratch[i]][f];
          const double xb = X[scratch[i + 1]][f];
          if (nl < min_leaf || nr < min_leaf || !(xa < xb)) continue;
          const double right_sum = total - left_sum;
          const double score = left_sum * left_sum / static_cast<double>(nl) +
                               right_sum * right_sum / static_cast<double>(nr);
          if (!found || score > best.score) {
            double mid = 0.5 * (xa + xb);
            if (!(mid < xb)) mid = xa;
            best = {static_cast<int>(f), mid, score};
            found = true;
          }
        }
      }
      return best;
    }
  };

  std::vector<Node> nodes_;
};

}  // namespace dss
