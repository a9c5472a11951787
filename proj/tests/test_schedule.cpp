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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <stdexcept>

#include "epochlab/schedule.hpp"

using Catch::Approx;
using namespace epochlab;

// Reference values below were computed with mpmath at 30 significant digits,
// straight from the closed forms.
namespace {
constexpr double kH0_250_1000 = 0.66143782776614764762540393841;
constexpr double kHyperbolicAt250 = 0.338628316016628967139358601984;
constexpr double kExpHyperbolicAt250 = 0.0103677977523819659595097485722;
constexpr double kExponentialAt50 = 0.000346882812919750152889265684797;
}  // namespace

TEST_CASE("h_curve closed form", "[schedule][h]") {
  SECTION("vertex is zero") {
    for (std::size_t n : {0u, 7u, 250u, 1000u}) REQUIRE(h_curve(n, n, 1000) == 0.0);
  }
  SECTION("U == N gives the asymptote (N - n) / N") {
    for (std::size_t n = 0; n <= 40; ++n) REQUIRE(h_curve(n, 40, 40) == Approx((40.0 - n) / 40.0).epsilon(1e-14));
  }
  SECTION("h(0; 250, 1000)") { REQUIRE(h_curve(0, 250, 1000) == Approx(kH0_250_1000).epsilon(1e-15)); }
  SECTION("strictly decreasing on [0, N]") {
    for (std::size_t n = 0; n < 300; ++n) REQUIRE(h_curve(n + 1, 300, 777) < h_curve(n, 300, 777));
  }
  SECTION("domain errors") {
    REQUIRE_THROWS_AS(h_curve(11, 10, 20), ScheduleError);
    REQUIRE_THROWS_AS(h_curve(0, 21, 20), ScheduleError);
    REQUIRE_THROWS_AS(h_curve(0, 0, 0), ScheduleError);
  }
}

TEST_CASE("hyperbolic schedule", "[schedule][hyperbolic]") {
  const auto spec = ScheduleSpec::hyperbolic(1.0, 1e-4, 250, 1000);
  REQUIRE(eval_hyperbolic(spec, 0) == 1.0);
  REQUIRE(eval_hyperbolic(spec, 250) == Approx(kHyperbolicAt250).epsilon(1e-13));

  SECTION("U == N decays linearly to eta_inf") {
    const auto lin = ScheduleSpec::hyperbolic(2.0, 0.5, 60, 60);
    for (std::size_t n = 0; n <= 60; ++n)
      REQUIRE(eval_hyperbolic(lin, n) == Approx(2.0 - 1.5 * n / 60.0).epsilon(1e-13));
    REQUIRE(eval_hyperbolic(lin, 60) == Approx(0.5).epsilon(1e-14));
  }
  SECTION("invalid parameters") {
    REQUIRE_THROWS_AS(eval_hyperbolic(ScheduleSpec::hyperbolic(1.0, 2.0, 10, 20), 0), ScheduleError);
    REQUIRE_THROWS_AS(eval_hyperbolic(ScheduleSpec::hyperbolic(1.0, 0.0, 10, 20), 0), ScheduleError);
    REQUIRE_THROWS_AS(eval_hyperbolic(ScheduleSpec::hyperbolic(1.0, 0.1, 21, 20), 0), ScheduleError);
    REQUIRE_THROWS_AS(eval_hyperbolic(spec, 251), ScheduleError);
    REQUIRE_THROWS_AS(eval_hyperbolic(ScheduleSpec::constant(1.0), 0), ScheduleError);
  }
}

TEST_CASE("exp-hyperbolic schedule", "[schedule][exphyperbolic]") {
  const auto spec = ScheduleSpec::exp_hyperbolic(1.0, 1e-3, 250, 1000);
  REQUIRE(eval_exp_hyperbolic(spec, 0) == 1.0);
  REQUIRE(eval_exp_hyperbolic(spec, 250) == Approx(kExpHyperbolicAt250).epsilon(1e-12));

  SECTION("U == N is geometric decay") {
    const auto geo = ScheduleSpec::exp_hyperbolic(1.0, 1e-2, 50, 50);
    for (std::size_t n = 0; n <= 50; ++n)
      REQUIRE(eval_exp_hyperbolic(geo, n) == Approx(std::pow(1e-2, n / 50.0)).epsilon(1e-12));
  }
}

TEST_CASE("baseline schedules", "[schedule][baselines]") {
  SECTION("polynomial") {
    const auto p = ScheduleSpec::polynomial(1.0, 0.5, 1000);
    REQUIRE(eval_polynomial(p, 0) == 1.0);
    REQUIRE(eval_polynomial(p, 1000) == 0.0);
    REQUIRE(eval_polynomial(p, 750) == Approx(0.5).epsilon(1e-15));
    REQUIRE_THROWS_AS(eval_polynomial(ScheduleSpec::polynomial(1.0, 1.0, 0), 1), ScheduleError);
  }
  SECTION("cosine") {
    const auto c = ScheduleSpec::cosine(1.0, 0.0, 100);
    REQUIRE(eval_cosine(c, 0) == 1.0);
    REQUIRE(eval_cosine(c, 100) == Approx(0.0).margin(1e-15));
    REQUIRE(eval_cosine(c, 50) == Approx(0.5).epsilon(1e-15));
    REQUIRE(eval_cosine(ScheduleSpec::cosine(3.0, 0.25, 10), 10) == Approx(0.25).epsilon(1e-15));
    REQUIRE_THROWS_AS(eval_cosine(ScheduleSpec::cosine(1.0, 2.0, 10), 0), ScheduleError);
  }
  SECTION("exponential") {
    REQUIRE(eval_exponential(ScheduleSpec::exponential(1.0, 0.9), 0) == 1.0);
    REQUIRE(eval_exponential(ScheduleSpec::exponential(1.0, 0.9), 2) == Approx(0.81).epsilon(1e-15));
    REQUIRE(eval_exponential(ScheduleSpec::exponential(5.91e-4, 0.9894), 50) ==
            Approx(kExponentialAt50).epsilon(1e-13));
    REQUIRE_THROWS_AS(eval_exponential(ScheduleSpec::exponential(1.0, 1.0), 0), ScheduleError);
  }
  SECTION("degenerate N = 0 returns eta_init for every kind") {
    for (const ScheduleSpec& s : {ScheduleSpec::constant(0.3), ScheduleSpec::polynomial(0.3, 2.0, 7),
                                  ScheduleSpec::cosine(0.3, 0.01, 7), ScheduleSpec::exponential(0.3, 0.5),
                                  ScheduleSpec::hyperbolic(0.3, 0.01, 7, 9),
                                  ScheduleSpec::exp_hyperbolic(0.3, 0.01, 7, 9)}) {
      const auto series = schedule_series(s, 1);
      REQUIRE(series.size() == 1);
      REQUIRE(series[0].lr == 0.3);
    }
  }
}

TEST_CASE("schedule_series and stepper", "[schedule][series]") {
  SECTION("constant") {
    const auto s = schedule_series(ScheduleSpec::constant(0.1), 3);
    REQUIRE(s.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      REQUIRE(s[i].epoch == i);
      REQUIRE(s[i].lr == 0.1);
    }
  }
  SECTION("hyperbolic with epochs = U + 1 is a linear ramp") {
    const auto s = schedule_series(ScheduleSpec::hyperbolic(1.0, 1e-4, 0, 100), 101);
    REQUIRE(s.front().lr == 1.0);
    REQUIRE(s.back().lr == Approx(1e-4).epsilon(1e-10));
    for (std::size_t i = 1; i + 1 < s.size(); ++i)
      REQUIRE(s[i].lr - s[i - 1].lr == Approx(s[i + 1].lr - s[i].lr).epsilon(1e-9));
  }
  SECTION("N > U is rejected") {
    REQUIRE_THROWS_AS(schedule_series(ScheduleSpec::hyperbolic(1.0, 1e-4, 0, 1000), 1002), ScheduleError);
    REQUIRE_NOTHROW(schedule_series(ScheduleSpec::hyperbolic(1.0, 1e-4, 0, 1000), 1001));
  }
  SECTION("stepper follows the series and refuses to overstep") {
    const auto spec = ScheduleSpec::exp_hyperbolic(1e-2, 1e-5, 0, 50).for_epochs(20);
    ScheduleStepper st(spec);
    const auto series = schedule_series(spec, 20);
    REQUIRE(st.lr() == series[0].lr);
    for (std::size_t n = 1; n < 20; ++n) REQUIRE(st.step() == series[n].lr);
    REQUIRE_FALSE(st.can_step());
    REQUIRE_THROWS_AS(st.step(), std::out_of_range);
  }
  SECTION("hyperbolic with N = U ends exactly at eta_inf after N steps") {
    ScheduleStepper st(ScheduleSpec::hyperbolic(1.0, 0.125, 16, 16));
    double last = st.lr();
    for (int i = 0; i < 16; ++i) last = st.step();
    REQUIRE(last == Approx(0.125).epsilon(1e-15));
  }
  SECTION("N-independent schedules step freely") {
    ScheduleStepper st(ScheduleSpec::constant(0.5));
    for (int i = 0; i < 100; ++i) REQUIRE(st.step() == 0.5);
  }
}

TEST_CASE("presets", "[schedule][presets]") {
  REQUIRE(schedule_presets().size() == 24);
  const auto eh = find_preset("deeponet-exphyperbolic");
  REQUIRE(eh.has_value());
  REQUIRE(eh->kind == ScheduleKind::ExpHyperbolic);
  REQUIRE(eh->eta_init == 4.59e-3);
  REQUIRE(eh->eta_inf == 5.74e-7);
  REQUIRE(eh->upper_bound == 250);
  for (const auto& p : schedule_presets()) REQUIRE_NOTHROW(p.spec.validate());
  REQUIRE_FALSE(find_preset("resnet-cosine").has_value());
}

// Property suite over random parameter draws.
TEST_CASE("hyperbolic properties on random draws", "[schedule][property]") {
  std::mt19937_64 gen(20240601);
  std::uniform_int_distribution<std::size_t> upper_dist(2, 5000);
  std::uniform_real_distribution<double> log_lr(-8.0, 0.0);
  constexpr int kDraws = 2000;

  for (int draw = 0; draw < kDraws; ++draw) {
    const std::size_t u = upper_dist(gen);
    const std::size_t n_max = std::uniform_int_distribution<std::size_t>(1, u)(gen);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, n_max)(gen);
    double a = std::pow(10.0, log_lr(gen));
    double b = std::pow(10.0, log_lr(gen));
    if (a == b) continue;
    if (a < b) std::swap(a, b);
    const auto hyp = ScheduleSpec::hyperbolic(a, b, n_max, u);
    const auto ehyp = ScheduleSpec::exp_hyperbolic(a, b, n_max, u);

    REQUIRE(h_curve(0, n_max, u) <= 1.0 + 1e-12);
    REQUIRE(eval_hyperbolic(hyp, n_max) >= b * (1.0 - 1e-12));
    REQUIRE(eval_exp_hyperbolic(ehyp, n_max) >= b * (1.0 - 1e-12));
    const double via_log = std::exp(hyperbolic_interpolate(std::log(a), std::log(b), n, n_max, u));
    REQUIRE(std::abs(eval_exp_hyperbolic(ehyp, n) - via_log) <= 1e-12 * via_log);
    if (n < n_max) {
      REQUIRE(eval_hyperbolic(hyp, n + 1) <= eval_hyperbolic(hyp, n));
      REQUIRE(eval_exp_hyperbolic(ehyp, n + 1) <= eval_exp_hyperbolic(ehyp, n));
    }
  }
}
