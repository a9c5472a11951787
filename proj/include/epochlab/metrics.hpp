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
#include <span>
#include <string>
#include <vector>

#include "epochlab/hermite.hpp"
#include "epochlab/schedule.hpp"
#include "epochlab/smoothing.hpp"

namespace epochlab {

class NoCrossingError : public MetricError {
 public:
  using MetricError::MetricError;
};

struct DecouplingReport {
  double slcd = 0.0;
  SmoothingSpec smoothing;
  std::size_t compared_epochs = 0;
};

/// Smoothed learning curve difference. Each curve is smoothed over its full
/// length, then the first min(len1, len2) epochs are compared. 0 means the two
/// curves coincide, values near 1 mean they are fully decoupled.
inline DecouplingReport slcd(const LearningCurve& l1, const LearningCurve& l2, const SmoothingSpec& spec) {
  if (l1.values.empty() || l2.values.empty()) throw MetricError("slcd requires non-empty curves");
  const std::vector<double> s1 = smooth_values(l1.values, spec);
  const std::vector<double> s2 = smooth_values(l2.values, spec);
  const std::size_t n = std::min(s1.size(), s2.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double denom = s1[i] + s2[i];
    if (!(s1[i] > 0.0) || !(s2[i] > 0.0) || !std::isfinite(denom))
      throw MetricError("slcd: smoothed curves must stay positive (epoch " + std::to_string(i) + ")");
    total += std::abs(s1[i] - s2[i]) / denom;
  }
  return {total / static_cast<double>(n), spec, n};
}

struct IlriResult {
  double ilri = 0.0;
  double n_crossing = 0.0;
};

inline constexpr double kIlriThreshold = 0.8;
inline constexpr std::size_t kIlriSimpsonIntervals = 10'000;
inline constexpr double kIlriRootTolerance = 1e-10;

/// Area between the interpolated schedule and 80% of its starting rate, from
/// epoch 0 to the first epoch where the schedule reaches that level. Epochs are
/// treated as reals through a Catmull-Rom Hermite spline over the series.
inline IlriResult ilri(std::span<const SchedulePoint> series) {
  if (series.size() < 2) throw MetricError("ilri needs at least two schedule points");
  const double eta0 = series.front().lr;
  if (!(eta0 > 0.0)) throw MetricError("ilri needs a positive initial learning rate");
  const double target = kIlriThreshold * eta0;

  std::vector<double> xs(series.size());
  std::vector<double> ys(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    xs[i] = static_cast<double>(series[i].epoch);
    ys[i] = series[i].lr;
  }
  const CubicHermiteSpline spline = CubicHermiteSpline::catmull_rom(xs, ys);

  std::size_t hit = 0;
  for (std::size_t i = 1; i < ys.size(); ++i) {
    if (ys[i] <= target) {
      hit = i;
      break;
    }
  }
  if (hit == 0) throw NoCrossingError("schedule never drops to 80% of its initial learning rate");

  double lo = xs[hit - 1];
  double hi = xs[hit];
  if (ys[hit] == target) {
    lo = hi;
  } else {
    while (hi - lo > kIlriRootTolerance) {
      const double mid = 0.5 * (lo + hi);
      if (spline(mid) - target > 0.0)
        lo = mid;
      else
        hi = mid;
    }
  }
  const double crossing = 0.5 * (lo + hi);

  auto integrand = [&](double x) { return std::abs(spline(x) - target); };
  const double step = (crossing - xs.front()) / static_cast<double>(kIlriSimpsonIntervals);
  double acc = integrand(xs.front()) + integrand(crossing);
  for (std::size_t k = 1; k < kIlriSimpsonIntervals; ++k)
    acc += (k % 2 == 1 ? 4.0 : 2.0) * integrand(xs.front() + step * static_cast<double>(k));
  return {acc * step / 3.0, crossing - xs.front()};
}

struct ImprovementStats {
  double mean_pct = 0.0;
  double std_pct = 0.0;
  std::size_t interval = 50;
};

/// Relative improvement between consecutive endpoint values, in percent, with
/// positive meaning better. Returns the mean and population standard deviation.
inline ImprovementStats improvement_stats(std::span<const double> endpoints, bool higher_is_better,
                                          std::size_t interval = 50) {
  if (endpoints.size() < 2) throw MetricError("improvement statistics need at least two endpoints");
  std::vector<double> gains;
  gains.reserve(endpoints.size() - 1);
  for (std::size_t i = 1; i < endpoints.size(); ++i) {
    const double prev = endpoints[i - 1];
    const double cur = endpoints[i];
    if (prev == 0.0) throw MetricError("improvement statistics: zero baseline value");
    gains.push_back((higher_is_better ? cur - prev : prev - cur) / prev * 100.0);
  }
  double mean = 0.0;
  for (double g : gains) mean += g;
  mean /= static_cast<double>(gains.size());
  double var = 0.0;
  for (double g : gains) var += (g - mean) * (g - mean);
  var /= static_cast<double>(gains.size());
  return {mean, std::sqrt(var), interval};
}

}  // namespace epochlab
