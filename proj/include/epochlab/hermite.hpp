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

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace epochlab {

/// Piecewise cubic Hermite interpolant over strictly increasing knots.
class CubicHermiteSpline {
 public:
  CubicHermiteSpline(std::vector<double> knots, std::vector<double> values, std::vector<double> slopes)
      : x_(std::move(knots)), y_(std::move(values)), m_(std::move(slopes)) {
    if (x_.size() < 2 || y_.size() != x_.size() || m_.size() != x_.size())
      throw std::invalid_argument("Hermite spline needs >= 2 knots with matching values and slopes");
    for (std::size_t i = 1; i < x_.size(); ++i)
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("Hermite spline knots must be strictly increasing");
  }

  /// Catmull-Rom tangents: central differences inside, one-sided at the ends.
  static CubicHermiteSpline catmull_rom(std::span<const double> knots, std::span<const double> values) {
    const std::size_t n = knots.size();
    if (n < 2 || values.size() != n) throw std::invalid_argument("Catmull-Rom spline needs >= 2 matching knots");
    std::vector<double> slopes(n);
    slopes.front() = (values[1] - values[0]) / (knots[1] - knots[0]);
    slopes.back() = (values[n - 1] - values[n - 2]) / (knots[n - 1] - knots[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
      slopes[i] = (values[i + 1] - values[i - 1]) / (knots[i + 1] - knots[i - 1]);
    return {{knots.begin(), knots.end()}, {values.begin(), values.end()}, std::move(slopes)};
  }

  std::size_t size() const { return x_.size(); }
  double knot(std::size_t i) const { return x_[i]; }
  double value(std::size_t i) const { return y_[i]; }
  double front() const { return x_.front(); }
  double back() const { return x_.back(); }

  /// Evaluates at x; values outside the knot range extrapolate the end cubic.
  double operator()(double x) const {
    const std::size_t i = interval_of(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
  }

 private:
  std::size_t interval_of(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    if (it == x_.begin()) return 0;
    const auto idx = static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(idx, x_.size() - 2);
  }

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;
};

}  // namespace epochlab
