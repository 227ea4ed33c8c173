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

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dss/config_space.hpp"

namespace dss {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GpParams {
  double length_scale = 0.3;
  double signal_variance = 1.0;
  double noise_variance = 1e-2;
};

// In-place lower Cholesky factorization of a row-major n x n SPD matrix.
// Returns false if a non-positive pivot shows up; the upper triangle is zeroed.
inline bool cholesky_lower(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
  return true;
}

// Zero-mean GP regression with an RBF kernel on standardized targets.
// Posterior mean only; no predictive variance is kept.
class GaussianProcess {
 public:
  static constexpr double kJitterStart = 1e-10;
  static constexpr double kJitterMax = 1e-4;

  static GaussianProcess fit(const std::vector<FeatureVector>& X, std::span<const double> y,
                             const GpParams& params) {
    const std::size_t n = X.size();
    GaussianProcess gp;
    gp.params_ = params;
    gp.X_ = X;

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    gp.y_mean_ = mean;
    gp.y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;

    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) K[i * n + j] = K[j * n + i] = gp.kernel(X[i], X[j]);

    // Jitter escalates x10 from kJitterStart to kJitterMax (relative to the
    // signal variance) until the factorization succeeds.
    for (double rel = kJitterStart; rel <= kJitterMax * 1.0000001; rel *= 10.0) {
      const double jitter = rel * params.signal_variance;
      std::vector<double> L = K;
      for (std::size_t i = 0; i < n; ++i) L[i * n + i] += params.noise_variance + jitter;
      if (cholesky_lower(L, n)) {
        gp.chol_ = std::move(L);
        gp.jitter_ = jitter;
        break;
      }
    }
    if (gp.chol_.empty())
      throw FitError("gaussian process: Cholesky failed after jitter escalation");

    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (y[i] - mean) / gp.y_scale_;
    gp.alpha_ = gp.solve(std::move(z));
    return gp;
  }

  double kernel(std::span<const double> a, std::span<const double> b) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return params_.signal_variance *
           std::exp(-d2 / (2.0 * params_.length_scale * params_.length_scale));
  }

  double predict(std::span<const double> x) const {
    double m = 0.0;
    for (std::size_t i = 0; i < X_.size(); ++i) m += kernel(x, X_[i]) * alpha_[i];
    return y_mean_ + y_scale_ * m;
  }

  // Solves (K + (noise + jitter) I) v = b via the stored factor.
  std::vector<double> solve(std::vector<double> b) const {
    const std::size_t n = X_.size();
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i];
      for (std::size_t k = 0; k < i; ++k) s -= chol_[i * n + k] * b[k];
      b[i] = s / chol_[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = b[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= chol_[k * n + i] * b[k];
      b[i] = s / chol_[i * n + i];
    }
    return b;
  }

  const GpParams& params() const noexcept { return params_; }
  const std::vector<FeatureVector>& inputs() const noexcept { return X_; }
  const std::vector<double>& cholesky() const noexcept { return chol_; }
  const std::vector<double>& dual_weights() const noexcept { return alpha_; }
  double jitter() const noexcept { return jitter_; }
  double target_mean() const noexcept { return y_mean_; }
  double target_scale() const noexcept { return y_scale_; }

 private:
  GpParams params_;
  std::vector<FeatureVector> X_;
  std::vector<double> chol_;
  std::vector<double> alpha_;
  double jitter_ = 0.0;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

}  // namespace dss
