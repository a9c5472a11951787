/*
 * Copyright (c) 2026 The EpochLab Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
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
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epochlab {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SmoothingKind { SavitzkyGolay, ExponentialMovingAverage, Identity };

struct SmoothingSpec {
  SmoothingKind kind = SmoothingKind::SavitzkyGolay;
  std::size_t window = 9;
  std::size_t poly_order = 3;
  double alpha = 0.3;

  static SmoothingSpec savitzky_golay(std::size_t window = 9, std::size_t poly_order = 3) {
    return {SmoothingKind::SavitzkyGolay, window, poly_order, 0.3};
  }
  static SmoothingSpec ema(double alpha) { return {SmoothingKind::ExponentialMovingAverage, 1, 0, alpha}; }
  static SmoothingSpec identity() { return {SmoothingKind::Identity, 1, 0, 1.0}; }

  void validate() const {
    switch (kind) {
      case SmoothingKind::SavitzkyGolay:
        if (window == 0 || window % 2 == 0) throw MetricError("Savitzky-Golay window must be odd and positive");
        if (poly_order >= window) throw MetricError("Savitzky-Golay polynomial order must be below the window size");
        break;
      case SmoothingKind::ExponentialMovingAverage:
        if (!(alpha > 0.0 && alpha <= 1.0)) throw MetricError("EMA alpha must lie in (0, 1]");
        break;
      case SmoothingKind::Identity: break;
    }
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind) {
      case SmoothingKind::SavitzkyGolay: os << "savgol(window=" << window << ",order=" << poly_order << ")"; break;
      case SmoothingKind::ExponentialMovingAverage: os << "ema(alpha=" << alpha << ")"; break;
      case SmoothingKind::Identity: os << "identity"; break;
    }
    return os.str();
  }

  friend bool operator==(const SmoothingSpec&, const SmoothingSpec&) = default;
};

namespace detail {

// Weights that evaluate the least-squares polynomial of degree `order`, fitted
// to `window` consecutive samples, at sample position `at` (0-based within the
// window). Offsets are scaled to [-1, 1] to keep the normal matrix well
// conditioned.
inline Eigen::VectorXd savgol_weights(std::size_t window, std::size_t order, std::size_t at) {
  const Eigen::Index w = static_cast<Eigen::Index>(window);
  const Eigen::Index k = static_cast<Eigen::Index>(order) + 1;
  const double half = window > 1 ? static_cast<double>(window - 1) / 2.0 : 1.0;
  Eigen::MatrixXd vander(w, k);
  for (Eigen::Index i = 0; i < w; ++i) {
    const double x = (static_cast<double>(i) - half) / half;
    double p = 1.0;
    for (Eigen::Index j = 0; j < k; ++j, p *= x) vander(i, j) = p;
  }
  Eigen::RowVectorXd basis(k);
  const double x = (static_cast<double>(at) - half) / half;
  double p = 1.0;
  for (Eigen::Index j = 0; j < k; ++j, p *= x) basis(j) = p;
  // weights^T = basis * (V^T V)^-1 V^T
  const Eigen::MatrixXd pinv = vander.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(w, w));
  return (basis * pinv).transpose();
}

}  // namespace detail

/// Savitzky-Golay filter. Interior points use the centred window; the first and
/// last half-window points are read off the polynomial fitted to the first and
/// last full windows, so polynomials up to `poly_order` pass through unchanged
/// and the output has the input length.
inline std::vector<double> savitzky_golay(std::span<const double> values, std::size_t window, std::size_t poly_order) {
  SmoothingSpec::savitzky_golay(window, poly_order).validate();
  const std::size_t len = values.size();
  if (len < window)
    throw MetricError("curve of length " + std::to_string(len) + " is shorter than the smoothing window " +
                      std::to_string(window));
  const std::size_t half = window / 2;
  std::vector<double> out(len);

  auto apply = [&](const Eigen::VectorXd& w, std::size_t first) {
    double acc = 0.0;
    for (std::size_t j = 0; j < window; ++j) acc += w(static_cast<Eigen::Index>(j)) * values[first + j];
    return acc;
  };

  const Eigen::VectorXd centre = detail::savgol_weights(window, poly_order, half);
  for (std::size_t i = half; i + half < len; ++i) out[i] = apply(centre, i - half);
  for (std::size_t i = 0; i < half; ++i) {
    out[i] = apply(detail::savgol_weights(window, poly_order, i), 0);
    const std::size_t pos = window - 1 - i;
    out[len - 1 - i] = apply(detail::savgol_weights(window, poly_order, pos), len - window);
  }
  return out;
}

inline std::vector<double> exponential_moving_average(std::span<const double> values, double alpha) {
  SmoothingSpec::ema(alpha).validate();
  std::vector<double> out(values.size());
  double state = values.empty() ? 0.0 : values[0];
  for (std::size_t i = 0; i < values.size(); ++i) {
    state = alpha * values[i] + (1.0 - alpha) * state;
    out[i] = state;
  }
  return out;
}

/// Applies `spec` to a raw sequence.
inline std::vector<double> smooth_values(std::span<const double> values, const SmoothingSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case SmoothingKind::SavitzkyGolay: return savitzky_golay(values, spec.window, spec.poly_order);
    case SmoothingKind::ExponentialMovingAverage: return exponential_moving_average(values, spec.alpha);
    case SmoothingKind::Identity: break;
  }
  return {values.begin(), values.end()};
}

/// Per-epoch series of one scalar metric from a training run.
struct LearningCurve {
  std::vector<double> values;
  std::string label;

  void validate() const {
    if (values.empty()) throw MetricError("learning curve '" + label + "' is empty");
    for (double v : values)
      if (!std::isfinite(v) || !(v > 0.0))
        throw MetricError("learning curve '" + label + "' has a non-positive or non-finite value");
  }
};

inline LearningCurve smooth(const LearningCurve& curve, const SmoothingSpec& spec) {
  return {smooth_values(curve.values, spec), curve.label};
}

}  // namespace epochlab
