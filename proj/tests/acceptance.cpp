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

// Acceptance checks: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "epochlab/datasets.hpp"
#include "epochlab/experiment.hpp"
#include "epochlab/metrics.hpp"
#include "epochlab/nn.hpp"
#include "epochlab/regression.hpp"
#include "epochlab/schedule.hpp"

namespace fs = std::filesystem;
using namespace epochlab;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string num(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path g_work_dir = "acceptance_work";

// ---------------------------------------------------------------------------
// 1. ILRI table
// ---------------------------------------------------------------------------

Outcome criterion_ilri() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  struct Row {
    const char* name;
    ScheduleSpec spec;
    double expected[3];
    double tol;
  };
  const Row rows[] = {
      {"polynomial", ScheduleSpec::polynomial(1.0, 0.5, 0), {75.0, 50.0, 25.0}, 0.1},
      {"cosine", ScheduleSpec::cosine(1.0, 1e-4, 0), {75.0, 50.0, 25.0}, 0.1},
      {"hyperbolic", ScheduleSpec::hyperbolic(1.0, 1e-3, 0, 1000), {38.01, 15.31, 3.66}, 0.5},
      {"exphyperbolic", ScheduleSpec::exp_hyperbolic(1.0, 1e-3, 0, 1000), {34.46, 13.67, 3.24}, 0.5},
  };
  // N = 250, 500, 750 against N = 1000, i.e. budgets of N + 1 epochs.
  const std::size_t budgets[] = {251, 501, 751};
  for (const Row& r : rows) {
    const double base = ilri(schedule_series(r.spec.for_epochs(1001), 1001)).ilri;
    for (int i = 0; i < 3; ++i) {
      const double cur = ilri(schedule_series(r.spec.for_epochs(budgets[i]), budgets[i])).ilri;
      const double pct = std::abs(base - cur) / base * 100.0;
      o.check(std::abs(pct - r.expected[i]) <= r.tol, std::string(r.name) + " N=" + std::to_string(budgets[i] - 1) +
                                                           ": " + num(pct, 5) + "% (expected " +
                                                           num(r.expected[i]) + " +/- " + num(r.tol) + ")");
    }
  }
  const double secs = seconds_since(t0);
  o.check(secs < 10.0, "runtime " + num(secs, 3) + " s < 10 s");
  return o;
}

// ---------------------------------------------------------------------------
// 2. Property suite
// ---------------------------------------------------------------------------

constexpr int kDraws = 10'000;

Outcome criterion_properties() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(0x5eed2026);
  auto uniform_int = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  auto log_uniform = [&](double lo_exp, double hi_exp) {
    return std::pow(10.0, std::uniform_real_distribution<double>(lo_exp, hi_exp)(gen));
  };
  auto lr_pair = [&]() {
    double a = log_uniform(-6.0, 1.0), b = log_uniform(-8.0, 0.0);
    while (!(a > b)) {
      a = log_uniform(-6.0, 1.0);
      b = log_uniform(-8.0, 0.0);
    }
    return std::pair{a, b};
  };

  {  // (n, h(n)) lies on the hyperbola
    double worst = 0.0;
    for (int d = 0; d < kDraws; ++d) {
      const std::size_t u = uniform_int(2, 5000);
      const std::size_t n_max = uniform_int(1, u - 1);
      const std::size_t n = uniform_int(0, n_max);
      const double U = static_cast<double>(u), N = static_cast<double>(n_max), x = static_cast<double>(n);
      const double y = h_curve(n, n_max, u);
      const double lead = (x - U) * (x - U) / ((U - N) * (U - N));
      const double lhs = lead - y * y / (((U - N) / U) * ((U - N) / U));
      // Relative to the size of the terms being differenced.
      worst = std::max(worst, std::abs(lhs - 1.0) / std::max(1.0, lead));
    }
    o.check(worst <= 1e-10, "hyperbola identity, max relative error " + num(worst, 3));
  }
  {  // h(0) <= 1 with equality iff N = U
    bool ok = true;
    for (int d = 0; d < kDraws; ++d) {
      const std::size_t u = uniform_int(1, 10000);
      const std::size_t n_max = d % 4 == 0 ? u : uniform_int(1, u);
      const double h0 = h_curve(0, n_max, u);
      ok = ok && h0 <= 1.0 + 1e-12;
      ok = ok && (n_max == u ? std::abs(h0 - 1.0) <= 1e-12 : h0 < 1.0 - 1e-12);
    }
    o.check(ok, "h(0) <= 1, equality iff N = U");
  }
  {  // value at N stays above eta_inf
    bool ok3 = true, ok4 = true;
    for (int d = 0; d < kDraws; ++d) {
      const auto [a, b] = lr_pair();
      const std::size_t u = uniform_int(1, 5000);
      const std::size_t n_max = uniform_int(1, u);
      ok3 = ok3 && eval_hyperbolic(ScheduleSpec::hyperbolic(a, b, n_max, u), n_max) >= b;
      ok4 = ok4 && eval_exp_hyperbolic(ScheduleSpec::exp_hyperbolic(a, b, n_max, u), n_max) >= b;
    }
    o.check(ok3, "hyperbolic lr(N) >= eta_inf");
    o.check(ok4, "exp-hyperbolic lr(N) >= eta_inf");
  }
  {  // exp-hyperbolic is the hyperbolic law in log space, every n
    double worst = 0.0;
    for (int d = 0; d < kDraws; ++d) {
      const auto [a, b] = lr_pair();
      const std::size_t u = uniform_int(1, 1000);
      const std::size_t n_max = uniform_int(1, u);
      const auto spec = ScheduleSpec::exp_hyperbolic(a, b, n_max, u);
      for (std::size_t n = 0; n <= n_max; ++n) {
        const double direct = eval_exp_hyperbolic(spec, n);
        const double via = std::exp(hyperbolic_interpolate(std::log(a), std::log(b), n, n_max, u));
        worst = std::max(worst, std::abs(direct - via) / via);
      }
    }
    o.check(worst <= 1e-12, "log-space identity, max relative error " + num(worst, 3));
  }
  {  // forward difference at n = 0 against the asymptote slope, N <= U/10
    double worst = 0.0;
    std::size_t held = 0;
    for (int d = 0; d < kDraws; ++d) {
      const std::size_t u = uniform_int(20, 10000);
      const std::size_t n_max = uniform_int(1, u / 10);
      const double U = static_cast<double>(u);
      const double dev = std::abs(U * (h_curve(1, n_max, u) - h_curve(0, n_max, u)) + 1.0);
      worst = std::max(worst, dev);
      held += dev < 0.05 ? 1 : 0;
    }
    o.check(held == kDraws, "|U(h(1)-h(0)) + 1| < 0.05 for N <= U/10: held on " + std::to_string(held) + "/" +
                                std::to_string(kDraws) + " draws, worst deviation " + num(worst, 4));
    // The slope at n = 0 is -1/(U h(0)), so it reaches -1/U only as N -> U.
    double near_worst = 0.0;
    for (int d = 0; d < kDraws; ++d) {
      const std::size_t u = uniform_int(100, 10000);
      const std::size_t n_max = uniform_int(u - u / 10, u);
      const double U = static_cast<double>(u);
      near_worst = std::max(near_worst, std::abs(U * (h_curve(1, n_max, u) - h_curve(0, n_max, u)) + 1.0));
    }
    o.note("reference: for U - N <= U/10 the worst deviation is " + num(near_worst, 4));
  }
  {  // every scheduler is non-increasing
    bool ok = true;
    for (int d = 0; d < kDraws; ++d) {
      const auto [a, b] = lr_pair();
      const std::size_t u = uniform_int(1, 1000);
      const std::size_t epochs = uniform_int(1, u + 1);
      ScheduleSpec spec;
      switch (d % 6) {
        case 0: spec = ScheduleSpec::constant(a); break;
        case 1: spec = ScheduleSpec::polynomial(a, log_uniform(-1.0, 1.0), 0); break;
        case 2: spec = ScheduleSpec::cosine(a, b, 0); break;
        case 3: spec = ScheduleSpec::exponential(a, std::uniform_real_distribution<double>(0.5, 0.9999)(gen)); break;
        case 4: spec = ScheduleSpec::hyperbolic(a, b, 0, u); break;
        default: spec = ScheduleSpec::exp_hyperbolic(a, b, 0, u); break;
      }
      const auto series = schedule_series(spec.for_epochs(epochs), epochs);
      for (std::size_t i = 1; i < series.size(); ++i) ok = ok && series[i].lr <= series[i - 1].lr;
    }
    o.check(ok, "all six schedulers non-increasing");
  }
  {  // exponential ignores N
    bool ok = true;
    for (int d = 0; d < kDraws; ++d) {
      const double a = log_uniform(-6.0, 1.0);
      const double g = std::uniform_real_distribution<double>(0.5, 0.9999)(gen);
      const std::size_t n = uniform_int(0, 500);
      const auto s1 = ScheduleSpec::exponential(a, g).for_epochs(n + 1 + uniform_int(0, 500));
      const auto s2 = ScheduleSpec::exponential(a, g).for_epochs(n + 1 + uniform_int(0, 5000));
      ok = ok && eval_exponential(s1, n) == eval_exponential(s2, n);
    }
    o.check(ok, "exponential independent of N");
  }
  const double secs = seconds_since(t0);
  o.check(secs < 30.0, "runtime " + num(secs, 3) + " s < 30 s");
  return o;
}

// ---------------------------------------------------------------------------
// 3. Early-epoch shape
// ---------------------------------------------------------------------------

Outcome criterion_shape() {
  Outcome o;
  // Reference parameters: eta_init 1; eta_inf 1e-4, U 1000; p 0.5; eta_min 1e-4.
  // Budgets 250 and 1000 mean N = 250 and N = 1000 here.
  struct Case {
    const char* name;
    ScheduleSpec spec;
    bool consistent;
  };
  const Case cases[] = {
      {"hyperbolic", ScheduleSpec::hyperbolic(1.0, 1e-4, 0, 1000), true},
      {"exphyperbolic", ScheduleSpec::exp_hyperbolic(1.0, 1e-4, 0, 1000), true},
      {"polynomial", ScheduleSpec::polynomial(1.0, 0.5, 0), false},
      {"cosine", ScheduleSpec::cosine(1.0, 1e-4, 0), false},
  };
  for (const Case& c : cases) {
    ScheduleSpec small = c.spec, large = c.spec;
    small.max_epoch = 250;
    large.max_epoch = 1000;
    double worst = 0.0;
    for (std::size_t n = 0; n <= 25; ++n) {
      const double a = eval(small, n), b = eval(large, n);
      worst = std::max(worst, std::abs(a - b) / b);
    }
    if (c.consistent)
      o.check(worst <= 0.05, std::string(c.name) + ": max relative gap for n <= 25 is " + num(100 * worst, 4) +
                                 "% (need <= 5%)");
    else
      o.check(worst > 0.20, std::string(c.name) + ": max relative gap for n <= 25 is " + num(100 * worst, 4) +
                                "% (need > 20%)");
  }
  return o;
}

// ---------------------------------------------------------------------------
// 4. Numerical oracles
// ---------------------------------------------------------------------------

Outcome criterion_oracles() {
  Outcome o;
  Rng rng(4242);
  auto random_matrix = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    return m;
  };
  auto grad_error = [&](auto&& loss, Eigen::VectorXd p, const Eigen::VectorXd& analytic) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double keep = p(i);
      p(i) = keep + 1e-5;
      const double up = loss(p);
      p(i) = keep - 1e-5;
      const double down = loss(p);
      p(i) = keep;
      const double fd = (up - down) / 2e-5;
      worst = std::max(worst, std::abs(fd - analytic(i)) / std::max({std::abs(fd), std::abs(analytic(i)), 1e-6}));
    }
    return worst;
  };
  auto view = [](const Eigen::VectorXd& v) { return std::span<const double>(v.data(), static_cast<std::size_t>(v.size())); };

  const std::vector<std::vector<std::size_t>> shapes = {{3, 5, 2}, {4, 6, 6, 1}, {2, 8, 3}, {5, 4, 4, 4, 2}};
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto spec = nn::DenseNetworkSpec::uniform(shapes[k], k % 2 ? nn::Activation::ReLU : nn::Activation::GELU, k);
    Eigen::VectorXd p = nn::init_dense(spec);
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += rng.uniform(-0.3, 0.3);  // non-zero biases too
    const Eigen::MatrixXd x = random_matrix(7, static_cast<Eigen::Index>(shapes[k].front()));
    const Eigen::MatrixXd t = random_matrix(7, static_cast<Eigen::Index>(shapes[k].back()));
    const auto lg = nn::loss_and_gradient(spec, view(p), x, t);
    const double err = grad_error([&](const Eigen::VectorXd& q) { return nn::mse(nn::forward_dense(spec, view(q), x), t); },
                                  p, lg.grad);
    o.check(err < 1e-4, "dense network " + std::to_string(k + 1) + " gradient relative error " + num(err, 3));
  }
  {
    const auto spec = nn::DeepONetSpec::make(6, {7, 7}, 4, 99);
    Eigen::VectorXd p = nn::init_deeponet(spec);
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += rng.uniform(-0.3, 0.3);
    const Eigen::MatrixXd u = random_matrix(5, 6);
    const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
    const Eigen::MatrixXd t = random_matrix(5, 4);
    const auto lg = nn::loss_and_gradient(spec, view(p), u, y, t);
    const double err = grad_error(
        [&](const Eigen::VectorXd& q) { return nn::mse(nn::forward_deeponet_batch(spec, view(q), u, y), t); }, p, lg.grad);
    o.check(err < 1e-4, "DeepONet gradient relative error " + num(err, 3));
  }
  {
    const auto u = newmark_beta_solve(OscillatorSpec{});
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      worst = std::max(worst, std::abs(u[i] - 0.1 * std::cos(std::sqrt(200.0) * 1e-3 * static_cast<double>(i))));
    o.check(worst < 1e-3, "Newmark zeta=0 max abs error " + num(worst, 4));
  }
  {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    double worst = 0.0;
    for (int d = 0; d < 1000; ++d) {
      const double A = coef(gen), B = coef(gen);
      std::vector<double> xs, ys;
      for (double x : {50.0, 100.0, 150.0, 200.0}) {
        xs.push_back(x);
        ys.push_back(std::exp(A) * std::pow(x, B));
      }
      const auto fit = power_regression(xs, ys);
      worst = std::max({worst, std::abs(fit.B - B), std::abs(fit.A - A)});
    }
    o.check(worst <= 1e-10, "power regression exact-model recovery, max error " + num(worst, 3));
  }
  return o;
}

// ---------------------------------------------------------------------------
// 5. Dataset counts
// ---------------------------------------------------------------------------

Outcome criterion_datasets() {
  Outcome o;
  const auto data = build_oscillation_dataset(default_damping_ratios());
  o.check(data.size() == 29646, "oscillation pairs " + std::to_string(data.size()));
  const auto split = normalize_and_split(data, 89);
  o.check(split.train.size() == 23716 && split.validation.size() == 5930,
          "split " + std::to_string(split.train.size()) + "/" + std::to_string(split.validation.size()));
  GrfSpec spec;
  const auto ones = make_operator_dataset(spec, RowMatrix::Ones(static_cast<Eigen::Index>(spec.function_count), 100));
  double worst = 0.0;
  for (Eigen::Index r = 0; r < ones.g.rows(); ++r)
    for (Eigen::Index j = 0; j < ones.g.cols(); ++j) worst = std::max(worst, std::abs(ones.g(r, j) - ones.targets[j]));
  o.check(worst <= 1e-12, "GRF u=1 override: max |g(y) - y| = " + num(worst, 3));
  return o;
}

// ---------------------------------------------------------------------------
// 6, 7. Desk decoupling sweep and determinism
// ---------------------------------------------------------------------------

ExperimentConfig desk_config(std::uint64_t dataset_seed) {
  nlohmann::json j = {
      {"task", "integral_operator"},
      {"dataset", {{"seed", dataset_seed}, {"functions", 1000}}},
      {"schedulers", nlohmann::json::array({{{"preset", "deeponet-cosine"}},
                                            {{"preset", "deeponet-exphyperbolic"}, {"upper_bound", 50}}})},
      {"epoch_budgets", {10, 40}},
      {"seeds", {89, 231, 928}},
      {"batch_size", 100},
      {"network", {{"hidden", {64, 64}}, {"p", 10}, {"activation", "gelu"}}},
  };
  return parse_experiment_config(j);
}

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct DeskResult {
  double slcd_cosine = 0.0;
  double slcd_exphyperbolic = 0.0;
};

DeskResult run_desk(std::uint64_t dataset_seed, const fs::path& dir) {
  fs::remove_all(dir);
  const auto c = desk_config(dataset_seed);
  const auto data = prepare_data(c, jobs());
  const auto result = run_sweep(c, data, dir, jobs());
  if (!result.failures.empty()) throw std::runtime_error("desk sweep run failed: " + result.failures.front().message);
  const auto report = analyze_sweep(load_records(dir));
  DeskResult r;
  for (const auto& s : report.schedulers) {
    if (s.label == "deeponet-cosine") r.slcd_cosine = s.slcd;
    if (s.label == "deeponet-exphyperbolic") r.slcd_exphyperbolic = s.slcd;
  }
  return r;
}

Outcome criterion_desk() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int held = 0;
  bool primary = false;
  for (std::uint64_t seed : {89, 231, 928}) {
    const auto r = run_desk(seed, g_work_dir / ("desk_" + std::to_string(seed)));
    const bool ok = r.slcd_exphyperbolic < r.slcd_cosine;
    held += ok ? 1 : 0;
    if (seed == 89) primary = ok;
    o.note("dataset seed " + std::to_string(seed) + ": sLCD exphyperbolic " + num(r.slcd_exphyperbolic, 5) +
           (ok ? " < " : " >= ") + "cosine " + num(r.slcd_cosine, 5));
  }
  o.note(std::string("primary dataset seed 89 ordering ") + (primary ? "holds" : "does not hold"));
  o.check(held >= 2, "sLCD(exphyperbolic) < sLCD(cosine) on " + std::to_string(held) + "/3 dataset seeds");
  const double secs = seconds_since(t0);
  o.check(secs < 15 * 60.0, "runtime " + num(secs, 4) + " s < 900 s");
  return o;
}

Outcome criterion_determinism() {
  Outcome o;
  const fs::path first = g_work_dir / "desk_89";
  const fs::path again = g_work_dir / "desk_89_rerun";
  if (!fs::exists(first)) run_desk(89, first);
  run_desk(89, again);
  const auto a = load_records(first);
  const auto b = load_records(again);
  o.check(a.size() == 12 && b.size() == 12, "record counts " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  std::size_t identical = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    const auto ja = a[i].to_json(), jb = b[i].to_json();
    const bool same = a[i].fingerprint == b[i].fingerprint && ja["lr"].dump() == jb["lr"].dump() &&
                      ja["val_loss"].dump() == jb["val_loss"].dump() && a[i].val_loss == b[i].val_loss;
    identical += same ? 1 : 0;
  }
  o.check(identical == a.size() && !a.empty(),
          std::to_string(identical) + "/" + std::to_string(a.size()) + " records byte-identical in lr and val_loss");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc) {
      g_work_dir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
    } else if (arg == "--verbose" || arg == "-v") {
      // notes are always printed; accepted for convenience
    } else {
      std::cerr << "usage: acceptance [--work-dir DIR] [--only 1,2,...]\n";
      return 1;
    }
  }
  fs::create_directories(g_work_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ILRI table reproduction", criterion_ilri},
      {"property suite on randomized draws", criterion_properties},
      {"early-epoch shape across budgets", criterion_shape},
      {"numerical oracles", criterion_oracles},
      {"dataset counts", criterion_datasets},
      {"desk-scale decoupling ordering", criterion_desk},
      {"sweep determinism", criterion_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& n : o.notes) std::cout << "    " << n << '\n';
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << criteria[i].first << '\n'
              << std::flush;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion(s) failed") << '\n';
  return failed == 0 ? 0 : 1;
}
