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
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>

#include "epochlab/smoothing.hpp"

namespace epochlab {

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b) for a, b > 0, x in [0, 1].
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete beta needs a, b > 0");
  if (x < 0.0 || x > 1.0) throw std::domain_error("incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
inline double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw std::domain_error("Student t needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  return regularized_incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

/// Fit of y = exp(A) * x^B by least squares on (ln x, ln y).
struct PowerRegression {
  double A = 0.0;
  double B = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;
};

inline PowerRegression power_regression(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw MetricError("power regression: xs and ys differ in length");
  const std::size_t n = xs.size();
  if (n < 3) throw MetricError("power regression needs at least three points");
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw MetricError("power regression needs positive data");
    mean_x += std::log(xs[i]);
    mean_y += std::log(ys[i]);
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(xs[i]) - mean_x;
    const double dy = std::log(ys[i]) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw MetricError("power regression: all x values are equal, slope undefined");

  PowerRegression fit;
  fit.B = sxy / sxx;
  fit.A = mean_y - fit.B * mean_x;
  const double dof = static_cast<double>(n - 2);
  // Residual sum of squares computed directly; syy - B*sxy cancels badly for near-exact fits.
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::log(ys[i]) - (fit.A + fit.B * std::log(xs[i]));
    sse += r * r;
  }
  // ln y constant up to rounding: flat fit, nothing explained.
  if (syy <= 1e-24 * static_cast<double>(n) * std::max(1.0, mean_y * mean_y)) {
    fit.B = 0.0;
    fit.A = mean_y;
    fit.r_squared = 0.0;
    fit.p_value = 1.0;
    return fit;
  }
  fit.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  const double se = std::sqrt(sse / dof / sxx);
  if (se == 0.0) {
    fit.p_value = 0.0;
    return fit;
  }
  fit.p_value = student_t_two_sided_p(fit.B / se, dof);
  return fit;
}

}  // namespace epochlab
