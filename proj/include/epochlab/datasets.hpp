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
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "epochlab/rng.hpp"

namespace epochlab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Damped oscillator sequences
// ---------------------------------------------------------------------------

/// m u'' + c u' + k u = 0 with c = zeta * 2 sqrt(m k).
struct OscillatorSpec {
  double mass = 1.0;
  double stiffness = 200.0;
  double damping_ratio = 0.0;
  double t_end = 10.0;
  double dt = 1e-3;
  double u0 = 0.1;
  double v0 = 0.0;
  double a0 = -20.0;

  double damping() const { return damping_ratio * 2.0 * std::sqrt(mass * stiffness); }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

  void validate() const {
    if (!(mass > 0.0) || !(stiffness > 0.0) || !(dt > 0.0) || !(t_end > 0.0))
      throw DatasetError("oscillator needs positive mass, stiffness, step and span");
    if (damping() < 0.0) throw DatasetError("oscillator damping must be non-negative");
    const double expected = -(damping() * v0 + stiffness * u0) / mass;
    if (std::abs(a0 - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
      throw DatasetError("initial acceleration is inconsistent with the equation of motion");
  }
};

inline constexpr double kNewmarkBeta = 0.25;
inline constexpr double kNewmarkGamma = 0.5;

/// Average-acceleration Newmark integration; returns u at every grid point,
/// t = 0 included.
inline std::vector<double> newmark_beta_solve(const OscillatorSpec& spec) {
  spec.validate();
  const double m = spec.mass;
  const double c = spec.damping();
  const double k = spec.stiffness;
  const double dt = spec.dt;
  const double beta = kNewmarkBeta;
  const double gamma = kNewmarkGamma;

  const double a_u = 1.0 / (beta * dt * dt);
  const double a_v = 1.0 / (beta * dt);
  const double a_a = 1.0 / (2.0 * beta) - 1.0;
  const double keff = k + gamma / (beta * dt) * c + m * a_u;

  const std::size_t steps = spec.steps();
  std::vector<double> u(steps + 1);
  double disp = spec.u0;
  double vel = spec.v0;
  double acc = spec.a0;
  u[0] = disp;
  for (std::size_t i = 1; i <= steps; ++i) {
    const double rhs = m * (a_u * disp + a_v * vel + a_a * acc) +
                       c * (gamma / (beta * dt) * disp + (gamma / beta - 1.0) * vel +
                            dt * (gamma / (2.0 * beta) - 1.0) * acc);
    const double disp_next = rhs / keff;
    const double acc_next = a_u * (disp_next - disp) - a_v * vel - a_a * acc;
    vel += dt * ((1.0 - gamma) * acc + gamma * acc_next);
    disp = disp_next;
    acc = acc_next;
    u[i] = disp;
  }
  return u;
}

/// History/horizon pairs cut from time series. Stored flat, one row per pair;
/// the logical shapes are (count, history, 1) and (count, horizon, 1).
struct WindowedSequenceDataset {
  RowMatrix inputs;
  RowMatrix labels;
  double norm_min = std::numeric_limits<double>::quiet_NaN();
  double norm_max = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

inline std::size_t window_count(std::size_t length, std::size_t history, std::size_t horizon) {
  return length >= history + horizon ? length - history - horizon + 1 : 0;
}

inline WindowedSequenceDataset sliding_window(std::span<const double> series, std::size_t history = 100,
                                              std::size_t horizon = 20) {
  if (history == 0 || horizon == 0) throw DatasetError("history and horizon must be positive");
  if (series.size() < history + horizon)
    throw DatasetError("series of length " + std::to_string(series.size()) + " is too short for history " +
                       std::to_string(history) + " + horizon " + std::to_string(horizon));
  const std::size_t count = window_count(series.size(), history, horizon);
  WindowedSequenceDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(history));
  out.labels.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(horizon));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < history; ++j)
      out.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = series[i + j];
    for (std::size_t j = 0; j < horizon; ++j)
      out.labels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = series[i + history + j];
  }
  return out;
}

inline WindowedSequenceDataset concatenate(std::span<const WindowedSequenceDataset> parts) {
  if (parts.empty()) throw DatasetError("nothing to concatenate");
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.inputs.rows();
  WindowedSequenceDataset out;
  out.inputs.resize(rows, parts.front().inputs.cols());
  out.labels.resize(rows, parts.front().labels.cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    if (p.inputs.cols() != out.inputs.cols() || p.labels.cols() != out.labels.cols())
      throw DatasetError("cannot concatenate windowed datasets of different shapes");
    out.inputs.middleRows(at, p.inputs.rows()) = p.inputs;
    out.labels.middleRows(at, p.labels.rows()) = p.labels;
    at += p.inputs.rows();
  }
  return out;
}

inline const std::vector<double>& default_damping_ratios() {
  static const std::vector<double> ratios = {0.0, 0.01, 0.02};
  return ratios;
}

/// One trajectory per damping ratio, windowed and stacked in ratio order.
inline WindowedSequenceDataset build_oscillation_dataset(std::span<const double> damping_ratios,
                                                         std::size_t history = 100, std::size_t horizon = 20) {
  std::vector<WindowedSequenceDataset> parts;
  for (double zeta : damping_ratios) {
    OscillatorSpec spec;
    spec.damping_ratio = zeta;
    spec.a0 = -(spec.damping() * spec.v0 + spec.stiffness * spec.u0) / spec.mass;
    const std::vector<double> u = newmark_beta_solve(spec);
    parts.push_back(sliding_window(u, history, horizon));
  }
  return concatenate(parts);
}

struct SequenceSplit {
  WindowedSequenceDataset train;
  WindowedSequenceDataset validation;
};

inline RowMatrix gather_rows(const RowMatrix& src, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

/// Seeded permutation split: the first floor(count * train_fraction) shuffled
/// indices go to training.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count,
                                                                                   std::uint64_t seed,
                                                                                   double train_fraction) {
  if (count == 0) throw DatasetError("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DatasetError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(derive_seed(seed, stream::kSplit));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(count) * train_fraction));
  return {std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)),
          std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end())};
}

/// Min-max normalises inputs and labels to [0, 1] with one global (min, max)
/// taken over the whole dataset, then shuffles and splits.
inline SequenceSplit normalize_and_split(const WindowedSequenceDataset& data, std::uint64_t seed,
                                         double train_fraction = 0.8) {
  if (data.size() == 0) throw DatasetError("cannot normalise an empty dataset");
  const double lo = std::min(data.inputs.minCoeff(), data.labels.minCoeff());
  const double hi = std::max(data.inputs.maxCoeff(), data.labels.maxCoeff());
  if (!(hi > lo)) throw DatasetError("cannot normalise constant data");
  const double scale = 1.0 / (hi - lo);

  WindowedSequenceDataset norm;
  norm.inputs = (data.inputs.array() - lo) * scale;
  norm.labels = (data.labels.array() - lo) * scale;
  norm.norm_min = lo;
  norm.norm_max = hi;

  const auto [train_idx, val_idx] = split_indices(data.size(), seed, train_fraction);
  SequenceSplit out;
  out.train = {gather_rows(norm.inputs, train_idx), gather_rows(norm.labels, train_idx), lo, hi};
  out.validation = {gather_rows(norm.inputs, val_idx), gather_rows(norm.labels, val_idx), lo, hi};
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian random field integral-operator dataset
// ---------------------------------------------------------------------------

struct GrfSpec {
  std::size_t sensor_count = 100;
  std::size_t target_count = 100;
  double length_scale_min = 0.1;
  double length_scale_max = 0.4;
  std::size_t function_count = 1000;
  double jitter = 1e-10;
  double max_jitter = 1e-6;

  void validate() const {
    if (sensor_count < 2 || target_count < 1) throw DatasetError("GRF needs >= 2 sensors and >= 1 target");
    if (!(length_scale_min > 0.0) || length_scale_max < length_scale_min)
      throw DatasetError("GRF length-scale range is invalid");
    if (function_count == 0) throw DatasetError("GRF needs at least one function");
    if (!(jitter > 0.0) || max_jitter < jitter) throw DatasetError("GRF jitter range is invalid");
  }
};

/// One input function with its operator labels G(u)(y) = int_0^y u.
struct OperatorSample {
  std::vector<double> u_values;
  std::vector<double> y_points;
  std::vector<double> g_values;
};

/// Inputs sampled on `sensors`, labels on `targets`. The target grid is shared
/// by every function; logically it is broadcast to shape (count, target_count).
struct OperatorDataset {
  std::vector<double> sensors;
  std::vector<double> targets;
  RowMatrix u;
  RowMatrix g;
  std::vector<double> length_scales;
  std::vector<double> jitters;

  std::size_t size() const { return static_cast<std::size_t>(u.rows()); }

  OperatorSample sample(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    OperatorSample s;
    s.u_values.assign(u.row(r).data(), u.row(r).data() + u.cols());
    s.y_points = targets;
    s.g_values.assign(g.row(r).data(), g.row(r).data() + g.cols());
    return s;
  }
};

inline std::vector<double> uniform_grid(std::size_t count) {
  std::vector<double> x(count);
  if (count == 1) return {0.0};
  for (std::size_t i = 0; i < count; ++i) x[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  return x;
}

/// K_ij = exp(-(x_i - x_j)^2 / (2 l^2)).
inline Eigen::MatrixXd squared_exponential_kernel(std::span<const double> points, double length_scale) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd k(n, n);
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = points[static_cast<std::size_t>(i)] - points[static_cast<std::size_t>(j)];
      k(i, j) = std::exp(-d * d * inv);
    }
  return k;
}

struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

/// Cholesky of K + jitter*I, growing jitter tenfold from `start` up to `limit`.
inline JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& kernel, double start, double limit) {
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(kernel.rows(), kernel.cols());
  for (double jitter = start; jitter <= limit * (1.0 + 1e-9); jitter *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(kernel + jitter * identity);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  throw DatasetError("kernel matrix is not positive definite even with jitter " + std::to_string(limit));
}

/// Exact integral from knots.front() to y of the piecewise-linear interpolant
/// of (knots, values). At knot positions this is the cumulative trapezoid rule.
inline double integrate_piecewise_linear(std::span<const double> knots, std::span<const double> values, double y) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i];
    const double b = knots[i + 1];
    if (y <= a) break;
    if (y >= b) {
      acc += 0.5 * (values[i] + values[i + 1]) * (b - a);
    } else {
      const double vy = values[i] + (values[i + 1] - values[i]) * (y - a) / (b - a);
      acc += 0.5 * (values[i] + vy) * (y - a);
      break;
    }
  }
  return acc;
}

/// Wraps given input functions (rows of `u` on the spec's sensor grid) into a
/// dataset with integral labels on the target grid.
inline OperatorDataset make_operator_dataset(const GrfSpec& spec, RowMatrix u) {
  if (static_cast<std::size_t>(u.cols()) != spec.sensor_count)
    throw DatasetError("input functions do not match the sensor count");
  OperatorDataset out;
  out.sensors = uniform_grid(spec.sensor_count);
  out.targets = uniform_grid(spec.target_count);
  out.g.resize(u.rows(), static_cast<Eigen::Index>(spec.target_count));
  std::vector<double> row(static_cast<std::size_t>(u.cols()));
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) row[static_cast<std::size_t>(c)] = u(r, c);
    if (spec.target_count == spec.sensor_count) {
      // Same uniform grid: plain cumulative trapezoid.
      double acc = 0.0;
      out.g(r, 0) = 0.0;
      for (std::size_t j = 1; j < row.size(); ++j) {
        acc += 0.5 * (row[j - 1] + row[j]) * (out.sensors[j] - out.sensors[j - 1]);
        out.g(r, static_cast<Eigen::Index>(j)) = acc;
      }
    } else {
      for (std::size_t j = 0; j < spec.target_count; ++j)
        out.g(r, static_cast<Eigen::Index>(j)) = integrate_piecewise_linear(out.sensors, row, out.targets[j]);
    }
  }
  out.u = std::move(u);
  out.length_scales.assign(static_cast<std::size_t>(out.u.rows()), std::numeric_limits<double>::quiet_NaN());
  out.jitters.assign(static_cast<std::size_t>(out.u.rows()), 0.0);
  return out;
}

/// Draws `function_count` zero-mean GRF realisations, each with its own length
/// scale ~ U[min, max], and labels them with the integral operator. Function i
/// uses substream i of `seed`, so the result does not depend on `jobs`.
inline OperatorDataset grf_sample(const GrfSpec& spec, std::uint64_t seed, unsigned jobs = 1) {
  spec.validate();
  const std::vector<double> sensors = uniform_grid(spec.sensor_count);
  const auto n = static_cast<Eigen::Index>(spec.sensor_count);
  RowMatrix u(static_cast<Eigen::Index>(spec.function_count), n);
  std::vector<double> scales(spec.function_count);
  std::vector<double> jitters(spec.function_count);

  auto draw = [&](std::size_t f) {
    Rng rng(derive_seed(seed, stream::kGrfFunction, f));
    const double ell = rng.uniform(spec.length_scale_min, spec.length_scale_max);
    const JitteredCholesky chol =
        cholesky_with_jitter(squared_exponential_kernel(sensors, ell), spec.jitter, spec.max_jitter);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
    u.row(static_cast<Eigen::Index>(f)) = (chol.lower * z).transpose();
    scales[f] = ell;
    jitters[f] = chol.jitter;
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(spec.function_count)));
  if (jobs == 1) {
    for (std::size_t f = 0; f < spec.function_count; ++f) draw(f);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t f = w; f < spec.function_count; f += jobs) draw(f);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  OperatorDataset out = make_operator_dataset(spec, std::move(u));
  out.length_scales = std::move(scales);
  out.jitters = std::move(jitters);
  return out;
}

struct OperatorSplit {
  OperatorDataset train;
  OperatorDataset validation;
};

inline OperatorSplit split_operator_dataset(const OperatorDataset& data, std::uint64_t seed,
                                            double train_fraction = 0.8) {
  const auto [train_idx, val_idx] = split_indices(data.size(), seed, train_fraction);
  auto take = [&](const std::vector<std::size_t>& idx) {
    OperatorDataset d;
    d.sensors = data.sensors;
    d.targets = data.targets;
    d.u = gather_rows(data.u, idx);
    d.g = gather_rows(data.g, idx);
    for (std::size_t i : idx) {
      d.length_scales.push_back(data.length_scales[i]);
      d.jitters.push_back(data.jitters[i]);
    }
    return d;
  };
  return {take(train_idx), take(val_idx)};
}

}  // namespace epochlab
