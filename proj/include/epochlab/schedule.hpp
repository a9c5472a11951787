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

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace epochlab {

/// Raised when a schedule is evaluated outside its parameter domain.
class ScheduleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class ScheduleKind { Constant, Polynomial, CosineAnnealing, Exponential, Hyperbolic, ExpHyperbolic };

inline constexpr std::array<ScheduleKind, 6> kAllScheduleKinds = {
    ScheduleKind::Constant,    ScheduleKind::Polynomial, ScheduleKind::CosineAnnealing,
    ScheduleKind::Exponential, ScheduleKind::Hyperbolic, ScheduleKind::ExpHyperbolic};

inline std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::Polynomial: return "polynomial";
    case ScheduleKind::CosineAnnealing: return "cosine";
    case ScheduleKind::Exponential: return "exponential";
    case ScheduleKind::Hyperbolic: return "hyperbolic";
    case ScheduleKind::ExpHyperbolic: return "exphyperbolic";
  }
  return "unknown";
}

/// Accepts the canonical names from to_string() plus a few common aliases.
inline std::optional<ScheduleKind> parse_schedule_kind(std::string_view name) {
  if (name == "constant" || name == "none") return ScheduleKind::Constant;
  if (name == "polynomial" || name == "poly") return ScheduleKind::Polynomial;
  if (name == "cosine" || name == "cosine_annealing" || name == "cosineannealing") return ScheduleKind::CosineAnnealing;
  if (name == "exponential" || name == "exp") return ScheduleKind::Exponential;
  if (name == "hyperbolic") return ScheduleKind::Hyperbolic;
  if (name == "exphyperbolic" || name == "exp_hyperbolic" || name == "exp-hyperbolic") return ScheduleKind::ExpHyperbolic;
  return std::nullopt;
}

/// Parameters of one learning-rate schedule.
///
/// Only the fields relevant to `kind` are read. `max_epoch` is the index of the
/// last epoch (total epochs minus one); use for_epochs() to derive it from an
/// epoch budget. For cosine annealing the starting rate is `eta_init`.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Constant;
  double eta_init = 1e-3;
  double eta_min = 0.0;
  double eta_inf = 0.0;
  double power = 1.0;
  double gamma = 0.9;
  std::size_t max_epoch = 0;
  std::size_t upper_bound = 1;

  static ScheduleSpec constant(double eta_init) {
    ScheduleSpec s;
    s.kind = ScheduleKind::Constant;
    s.eta_init = eta_init;
    return s;
  }
  static ScheduleSpec polynomial(double eta_init, double power, std::size_t max_epoch) {
    ScheduleSpec s;
    s.kind = ScheduleKind::Polynomial;
    s.eta_init = eta_init;
    s.power = power;
    s.max_epoch = max_epoch;
    return s;
  }
  static ScheduleSpec cosine(double eta_max, double eta_min, std::size_t max_epoch) {
    ScheduleSpec s;
    s.kind = ScheduleKind::CosineAnnealing;
    s.eta_init = eta_max;
    s.eta_min = eta_min;
    s.max_epoch = max_epoch;
    return s;
  }
  static ScheduleSpec exponential(double eta_init, double gamma) {
    ScheduleSpec s;
    s.kind = ScheduleKind::Exponential;
    s.eta_init = eta_init;
    s.gamma = gamma;
    return s;
  }
  static ScheduleSpec hyperbolic(double eta_init, double eta_inf, std::size_t max_epoch, std::size_t upper_bound) {
    ScheduleSpec s;
    s.kind = ScheduleKind::Hyperbolic;
    s.eta_init = eta_init;
    s.eta_inf = eta_inf;
    s.max_epoch = max_epoch;
    s.upper_bound = upper_bound;
    return s;
  }
  static ScheduleSpec exp_hyperbolic(double eta_init, double eta_inf, std::size_t max_epoch,
                                     std::size_t upper_bound) {
    ScheduleSpec s = hyperbolic(eta_init, eta_inf, max_epoch, upper_bound);
    s.kind = ScheduleKind::ExpHyperbolic;
    return s;
  }

  /// Copy with max_epoch set for a budget of `epochs` epochs (N = epochs - 1).
  ScheduleSpec for_epochs(std::size_t epochs) const {
    if (epochs == 0) throw ScheduleError("epoch budget must be at least 1");
    ScheduleSpec s = *this;
    s.max_epoch = epochs - 1;
    return s;
  }

  bool depends_on_max_epoch() const {
    return kind == ScheduleKind::Polynomial || kind == ScheduleKind::CosineAnnealing ||
           kind == ScheduleKind::Hyperbolic || kind == ScheduleKind::ExpHyperbolic;
  }

  bool is_hyperbolic() const { return kind == ScheduleKind::Hyperbolic || kind == ScheduleKind::ExpHyperbolic; }

  void validate() const {
    if (!(eta_init > 0.0) || !std::isfinite(eta_init)) throw ScheduleError("eta_init must be positive and finite");
    switch (kind) {
      case ScheduleKind::Constant: break;
      case ScheduleKind::Polynomial:
        if (!(power > 0.0) || !std::isfinite(power)) throw ScheduleError("polynomial power must be positive");
        break;
      case ScheduleKind::CosineAnnealing:
        if (!(eta_min >= 0.0) || eta_min > eta_init) throw ScheduleError("cosine requires eta_init >= eta_min >= 0");
        break;
      case ScheduleKind::Exponential:
        if (!(gamma > 0.0 && gamma < 1.0)) throw ScheduleError("exponential gamma must lie in (0, 1)");
        break;
      case ScheduleKind::Hyperbolic:
      case ScheduleKind::ExpHyperbolic:
        if (!(eta_inf > 0.0) || !(eta_init > eta_inf))
          throw ScheduleError("hyperbolic schedules require eta_init > eta_inf > 0");
        if (upper_bound == 0) throw ScheduleError("upper bound U must be positive");
        if (max_epoch > upper_bound)
          throw ScheduleError("max epoch N = " + std::to_string(max_epoch) + " exceeds upper bound U = " +
                              std::to_string(upper_bound));
        break;
    }
  }

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

// Radicands down to this value are treated as rounding noise at the vertex.
inline constexpr double kRadicandTolerance = 1e-12;

/// Upper-left branch of the hyperbola with vertex (N, 0), centre (U, 0) and
/// asymptote slope -1/U, sampled at epoch n. Requires n <= N <= U, U > 0.
inline double h_curve(std::size_t n, std::size_t max_epoch, std::size_t upper_bound) {
  if (upper_bound == 0) throw ScheduleError("h_curve: U must be positive");
  if (max_epoch > upper_bound) throw ScheduleError("h_curve: N exceeds U");
  if (n > max_epoch) throw ScheduleError("h_curve: n exceeds N");
  const double u = static_cast<double>(upper_bound);
  const double radicand = static_cast<double>(max_epoch - n) / u * (2.0 - static_cast<double>(max_epoch + n) / u);
  if (radicand < 0.0) {
    if (radicand < -kRadicandTolerance) throw ScheduleError("h_curve: negative radicand");
    return 0.0;
  }
  return std::sqrt(radicand);
}

/// Fraction of the start-to-floor gap still remaining at epoch n:
/// 1 + h(n) - h(0), clamped at 0. Written this way so that n = N = U lands on
/// the floor exactly instead of through a cancelling subtraction.
inline double hyperbolic_weight(std::size_t n, std::size_t max_epoch, std::size_t upper_bound) {
  const double w = 1.0 - (h_curve(0, max_epoch, upper_bound) - h_curve(n, max_epoch, upper_bound));
  return w < 0.0 ? 0.0 : w;
}

/// start + (start - floor) * (h(n) - h(0)), with no positivity requirement on
/// start/floor. This is the hyperbolic rate law; callers working in log space
/// pass logarithms here.
inline double hyperbolic_interpolate(double start, double floor, std::size_t n, std::size_t max_epoch,
                                     std::size_t upper_bound) {
  const double w = hyperbolic_weight(n, max_epoch, upper_bound);
  return w == 1.0 ? start : floor + (start - floor) * w;
}

namespace detail {

inline void require_kind(const ScheduleSpec& spec, ScheduleKind kind) {
  if (spec.kind != kind)
    throw ScheduleError(std::string("schedule kind mismatch: expected ") + std::string(to_string(kind)) + ", got " +
                        std::string(to_string(spec.kind)));
}

inline void require_within_max_epoch(const ScheduleSpec& spec, std::size_t n) {
  if (n > spec.max_epoch)
    throw ScheduleError("epoch " + std::to_string(n) + " is past the last epoch N = " +
                        std::to_string(spec.max_epoch));
}

}  // namespace detail

inline double eval_constant(const ScheduleSpec& spec, std::size_t /*n*/) {
  detail::require_kind(spec, ScheduleKind::Constant);
  spec.validate();
  return spec.eta_init;
}

inline double eval_polynomial(const ScheduleSpec& spec, std::size_t n) {
  detail::require_kind(spec, ScheduleKind::Polynomial);
  spec.validate();
  detail::require_within_max_epoch(spec, n);
  if (spec.max_epoch == 0) return spec.eta_init;
  const double frac = 1.0 - static_cast<double>(n) / static_cast<double>(spec.max_epoch);
  return spec.eta_init * std::pow(frac, spec.power);
}

inline double eval_cosine(const ScheduleSpec& spec, std::size_t n) {
  detail::require_kind(spec, ScheduleKind::CosineAnnealing);
  spec.validate();
  detail::require_within_max_epoch(spec, n);
  if (spec.max_epoch == 0) return spec.eta_init;
  const double phase = static_cast<double>(n) / static_cast<double>(spec.max_epoch) * std::numbers::pi;
  return spec.eta_min + 0.5 * (spec.eta_init - spec.eta_min) * (1.0 + std::cos(phase));
}

inline double eval_exponential(const ScheduleSpec& spec, std::size_t n) {
  detail::require_kind(spec, ScheduleKind::Exponential);
  spec.validate();
  return spec.eta_init * std::pow(spec.gamma, static_cast<double>(n));
}

inline double eval_hyperbolic(const ScheduleSpec& spec, std::size_t n) {
  detail::require_kind(spec, ScheduleKind::Hyperbolic);
  spec.validate();
  detail::require_within_max_epoch(spec, n);
  return hyperbolic_interpolate(spec.eta_init, spec.eta_inf, n, spec.max_epoch, spec.upper_bound);
}

inline double eval_exp_hyperbolic(const ScheduleSpec& spec, std::size_t n) {
  detail::require_kind(spec, ScheduleKind::ExpHyperbolic);
  spec.validate();
  detail::require_within_max_epoch(spec, n);
  const double w = hyperbolic_weight(n, spec.max_epoch, spec.upper_bound);
  if (w == 1.0) return spec.eta_init;
  return spec.eta_inf * std::exp(std::log(spec.eta_init / spec.eta_inf) * w);
}

/// Learning rate of `spec` at epoch n.
inline double eval(const ScheduleSpec& spec, std::size_t n) {
  switch (spec.kind) {
    case ScheduleKind::Constant: return eval_constant(spec, n);
    case ScheduleKind::Polynomial: return eval_polynomial(spec, n);
    case ScheduleKind::CosineAnnealing: return eval_cosine(spec, n);
    case ScheduleKind::Exponential: return eval_exponential(spec, n);
    case ScheduleKind::Hyperbolic: return eval_hyperbolic(spec, n);
    case ScheduleKind::ExpHyperbolic: return eval_exp_hyperbolic(spec, n);
  }
  throw ScheduleError("unknown schedule kind");
}

struct SchedulePoint {
  std::size_t epoch = 0;
  double lr = 0.0;

  friend bool operator==(const SchedulePoint&, const SchedulePoint&) = default;
};

/// Rates for epochs 0 .. epochs-1, with N = epochs - 1 for N-dependent kinds.
inline std::vector<SchedulePoint> schedule_series(const ScheduleSpec& spec, std::size_t epochs) {
  const ScheduleSpec fitted = spec.for_epochs(epochs);
  fitted.validate();
  std::vector<SchedulePoint> out;
  out.reserve(epochs);
  for (std::size_t n = 0; n < epochs; ++n) out.push_back({n, eval(fitted, n)});
  return out;
}

/// Per-epoch adapter for training loops. Every rate is taken from the closed
/// form, so the stepper never accumulates error.
class ScheduleStepper {
 public:
  explicit ScheduleStepper(ScheduleSpec spec) : spec_(spec) {
    spec_.validate();
    lr_ = eval(spec_, 0);
  }

  const ScheduleSpec& spec() const { return spec_; }
  std::size_t epoch() const { return epoch_; }
  double lr() const { return lr_; }

  bool can_step() const { return !spec_.depends_on_max_epoch() || epoch_ < spec_.max_epoch; }

  /// Advances one epoch and returns the new rate.
  double step() {
    if (!can_step())
      throw std::out_of_range("cannot step past the last epoch N = " + std::to_string(spec_.max_epoch));
    ++epoch_;
    lr_ = eval(spec_, epoch_);
    return lr_;
  }

 private:
  ScheduleSpec spec_;
  std::size_t epoch_ = 0;
  double lr_ = 0.0;
};

// Tuned scheduler settings per model family. Tuning was done at a 50-epoch
// budget, so presets carry max_epoch = 49; call for_epochs() before use.
struct SchedulePreset {
  std::string name;
  ScheduleSpec spec;
};

namespace detail {

inline std::vector<SchedulePreset> build_presets() {
  constexpr std::size_t kTunedMaxEpoch = 49;
  struct Row {
    const char* model;
    double constant_lr;
    double poly_lr, poly_power;
    double cos_lr, cos_min;
    double exp_lr, exp_gamma;
    double hyp_lr, hyp_inf;
    std::size_t hyp_upper;
    double ehyp_lr, ehyp_inf;
    std::size_t ehyp_upper;
  };
  static constexpr std::array<Row, 4> rows = {{
      {"simplecnn", 6.15e-4, 7.92e-4, 0.7609, 1.06e-3, 2.13e-5, 5.91e-4, 0.9894, 9.39e-4, 9.47e-6, 400, 9.50e-4,
       5.40e-5, 350},
      {"lstm", 1.05e-4, 3.96e-3, 1.2752, 3.00e-3, 1.10e-7, 2.68e-3, 0.9392, 2.44e-3, 5.99e-6, 200, 2.44e-3, 5.99e-6,
       200},
      {"deeponet", 1.03e-3, 4.13e-3, 1.2443, 4.62e-3, 2.66e-7, 2.01e-3, 0.9598, 4.62e-3, 2.66e-7, 250, 4.59e-3,
       5.74e-7, 250},
      {"traonet", 7.27e-4, 7.36e-4, 0.5319, 1.59e-3, 2.61e-6, 1.53e-3, 0.9649, 2.55e-3, 1.69e-5, 250, 1.03e-3,
       7.11e-5, 350},
  }};
  std::vector<SchedulePreset> out;
  for (const Row& r : rows) {
    for (const ScheduleSpec& s : {
             ScheduleSpec::constant(r.constant_lr),
             ScheduleSpec::polynomial(r.poly_lr, r.poly_power, kTunedMaxEpoch),
             ScheduleSpec::cosine(r.cos_lr, r.cos_min, kTunedMaxEpoch),
             ScheduleSpec::exponential(r.exp_lr, r.exp_gamma),
             ScheduleSpec::hyperbolic(r.hyp_lr, r.hyp_inf, kTunedMaxEpoch, r.hyp_upper),
             ScheduleSpec::exp_hyperbolic(r.ehyp_lr, r.ehyp_inf, kTunedMaxEpoch, r.ehyp_upper),
         })
      out.push_back({std::string(r.model) + "-" + std::string(to_string(s.kind)), s});
  }
  return out;
}

}  // namespace detail

/// Named presets, e.g. "deeponet-exphyperbolic".
inline const std::vector<SchedulePreset>& schedule_presets() {
  static const std::vector<SchedulePreset> presets = detail::build_presets();
  return presets;
}

inline std::optional<ScheduleSpec> find_preset(std::string_view name) {
  for (const SchedulePreset& p : schedule_presets())
    if (p.name == name) return p.spec;
  return std::nullopt;
}

}  // namespace epochlab
