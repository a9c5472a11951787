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

// epochlab command-line driver: schedule curves, ILRI tables, datasets,
// training sweeps and their analysis.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "epochlab/dataset_io.hpp"
#include "epochlab/datasets.hpp"
#include "epochlab/experiment.hpp"
#include "epochlab/metrics.hpp"
#include "epochlab/plot.hpp"
#include "epochlab/schedule.hpp"

namespace fs = std::filesystem;
using namespace epochlab;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Thrown for bad flag values that CLI11 cannot catch on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_lr(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// schedule
// ---------------------------------------------------------------------------

struct ScheduleArgs {
  std::string kind;
  std::string preset;
  double eta_init = 1.0;
  double eta_inf = 1e-3;
  double eta_min = 0.0;
  double power = 1.0;
  double gamma = 0.9;
  std::size_t upper = 1000;
  std::vector<std::size_t> epochs;
  std::string out_dir;
  std::string svg;
};

ScheduleSpec schedule_from_args(const ScheduleArgs& a, const CLI::App& cmd) {
  ScheduleSpec s;
  if (!a.preset.empty()) {
    const auto p = find_preset(a.preset);
    if (!p) throw UsageError("unknown preset '" + a.preset + "'");
    s = *p;
  } else {
    if (a.kind.empty()) throw UsageError("one of --kind or --preset is required");
    const auto kind = parse_schedule_kind(a.kind);
    if (!kind) throw UsageError("unknown scheduler kind '" + a.kind + "'");
    s.kind = *kind;
    s.eta_init = a.eta_init;
    s.eta_inf = a.eta_inf;
    s.eta_min = a.eta_min;
    s.power = a.power;
    s.gamma = a.gamma;
    s.upper_bound = a.upper;
  }
  // Explicit flags override preset values.
  if (cmd.count("--eta-init")) s.eta_init = a.eta_init;
  if (cmd.count("--eta-inf")) s.eta_inf = a.eta_inf;
  if (cmd.count("--eta-min")) s.eta_min = a.eta_min;
  if (cmd.count("--power")) s.power = a.power;
  if (cmd.count("--gamma")) s.gamma = a.gamma;
  if (cmd.count("--upper")) s.upper_bound = a.upper;
  return s;
}

int cmd_schedule(const ScheduleArgs& a, const CLI::App& cmd) {
  const ScheduleSpec base = schedule_from_args(a, cmd);
  std::vector<std::vector<SchedulePoint>> curves;
  for (std::size_t e : a.epochs) {
    try {
      const ScheduleSpec s = base.for_epochs(e);
      s.validate();
      curves.push_back(schedule_series(s, e));
    } catch (const ScheduleError& err) {
      throw UsageError("--epochs " + std::to_string(e) + ": " + err.what());
    }
  }
  const std::string kind(to_string(base.kind));
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const fs::path path = fs::path(a.out_dir) / (kind + "_" + std::to_string(a.epochs[i]) + ".csv");
      std::ofstream out(path, std::ios::trunc);
      out << "epoch,lr\n";
      for (const auto& p : curves[i]) out << p.epoch << ',' << format_lr(p.lr) << '\n';
      if (!out) throw std::runtime_error("cannot write " + path.string());
      std::cerr << "wrote " << path.string() << '\n';
    }
  } else if (curves.size() == 1) {
    std::cout << "epoch,lr\n";
    for (const auto& p : curves[0]) std::cout << p.epoch << ',' << format_lr(p.lr) << '\n';
  } else {
    std::cout << "epochs,epoch,lr\n";
    for (std::size_t i = 0; i < curves.size(); ++i)
      for (const auto& p : curves[i]) std::cout << a.epochs[i] << ',' << p.epoch << ',' << format_lr(p.lr) << '\n';
  }
  if (!a.svg.empty()) {
    std::vector<LineSeries> lines;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      LineSeries l{"E=" + std::to_string(a.epochs[i]), {}, {}};
      for (const auto& p : curves[i]) {
        l.x.push_back(static_cast<double>(p.epoch));
        l.y.push_back(p.lr);
      }
      lines.push_back(std::move(l));
    }
    write_svg(a.svg, lines, {kind + " learning rate", "epoch", "learning rate"});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ilri
// ---------------------------------------------------------------------------

struct IlriArgs {
  std::vector<std::string> kinds = {"polynomial", "cosine", "hyperbolic", "exphyperbolic"};
  std::vector<std::size_t> epochs = {251, 501, 751};
  std::size_t baseline = 1001;
  double eta_init = 1.0;
  double eta_inf = 1e-3;
  double eta_min = 1e-4;
  double power = 0.5;
  double gamma = 0.9;
  std::size_t upper = 1000;
  bool csv = false;
};

int cmd_ilri(const IlriArgs& a) {
  struct Cell {
    std::string text;
    double ilri = 0.0;
    double pct = 0.0;
    bool ok = false;
  };
  auto evaluate = [&](const ScheduleSpec& spec, std::size_t epochs) {
    Cell c;
    try {
      const ScheduleSpec s = spec.for_epochs(epochs);
      s.validate();
      c.ilri = ilri(schedule_series(s, epochs)).ilri;
      c.ok = true;
    } catch (const NoCrossingError&) {
      c.text = "no crossing";
    } catch (const std::exception& e) {
      c.text = std::string("error: ") + e.what();
    }
    return c;
  };

  std::vector<std::string> names;
  std::vector<std::vector<Cell>> rows;
  for (const auto& k : a.kinds) {
    const auto kind = parse_schedule_kind(k);
    if (!kind) throw UsageError("unknown scheduler kind '" + k + "'");
    ScheduleSpec s;
    s.kind = *kind;
    s.eta_init = a.eta_init;
    s.eta_inf = a.eta_inf;
    s.eta_min = a.eta_min;
    s.power = a.power;
    s.gamma = a.gamma;
    s.upper_bound = a.upper;
    const Cell base = evaluate(s, a.baseline);
    std::vector<Cell> row;
    for (std::size_t e : a.epochs) {
      Cell c = evaluate(s, e);
      if (c.ok && base.ok) {
        c.pct = std::abs(base.ilri - c.ilri) / base.ilri * 100.0;
      } else if (c.ok) {
        c.ok = false;
        c.text = "baseline: " + base.text;
      }
      row.push_back(c);
    }
    names.emplace_back(to_string(*kind));
    rows.push_back(std::move(row));
  }

  if (a.csv) {
    std::cout << "scheduler,epochs,N,ilri,baseline_N,pct_diff\n";
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t i = 0; i < rows[r].size(); ++i) {
        const Cell& c = rows[r][i];
        std::cout << names[r] << ',' << a.epochs[i] << ',' << a.epochs[i] - 1 << ','
                  << (c.ok ? format_lr(c.ilri) : c.text) << ',' << a.baseline - 1 << ','
                  << (c.ok ? format_lr(c.pct) : "") << '\n';
      }
    return 0;
  }
  std::cout << "Relative ILRI difference vs N=" << a.baseline - 1 << " (N = epochs - 1)\n";
  std::cout << std::left << std::setw(16) << "scheduler";
  for (std::size_t e : a.epochs) std::cout << std::right << std::setw(14) << ("N=" + std::to_string(e - 1));
  std::cout << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::cout << std::left << std::setw(16) << names[r] << std::right;
    for (const Cell& c : rows[r]) {
      std::ostringstream cell;
      if (c.ok)
        cell << std::fixed << std::setprecision(2) << c.pct << '%';
      else
        cell << c.text;
      std::cout << std::setw(14) << cell.str();
    }
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// dataset
// ---------------------------------------------------------------------------

struct DatasetArgs {
  std::string kind;
  std::uint64_t seed = 89;
  std::string out;
  std::size_t functions = 1000;
  bool full_scale = false;
  unsigned jobs = 1;
};

int cmd_dataset(const DatasetArgs& a) {
  const fs::path out = a.out.empty() ? fs::path("data") / a.kind : fs::path(a.out);
  nlohmann::json meta;
  if (a.kind == "oscillation") {
    const auto& ratios = default_damping_ratios();
    const auto split = normalize_and_split(build_oscillation_dataset(ratios), a.seed);
    meta = save_oscillation_dataset(out, split, a.seed, ratios);
  } else {
    GrfSpec spec;
    spec.function_count = a.functions;
    const auto data = grf_sample(spec, a.seed, a.jobs);
    meta = save_operator_dataset(out, data, spec, a.seed);
  }
  std::cout << "wrote " << (out / "meta.json").string() << '\n' << meta.at("counts").dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// experiment / analyze
// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  bool dry_run = false;
  unsigned jobs = 1;
  std::string runs_dir;
  bool full_scale = false;
};

fs::path resolve_runs_dir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("EPOCHLAB_RUNS_DIR"); env && *env) return env;
  if (!from_config.empty()) return from_config;
  return "runs";
}

int cmd_experiment(const ExperimentArgs& a) {
  ExperimentConfig c = load_experiment_config(a.config);
  if (a.full_scale) {
    apply_full_scale(c);
    c.validate();
  }
  const fs::path runs = resolve_runs_dir(a.runs_dir, c.runs_dir);
  const auto plan = plan_sweep(c);
  if (a.dry_run) {
    std::cout << "planned runs: " << plan.size() << " (" << c.schedulers.size() << " schedulers x "
              << c.epoch_budgets.size() << " budgets x " << c.seeds.size() << " seeds)\nruns dir: " << runs.string()
              << '\n';
    std::cout << "fingerprint,scheduler,budget,seed,status\n";
    for (const auto& p : plan)
      std::cout << p.fingerprint << ',' << c.schedulers[p.scheduler_index].label << ',' << p.budget << ',' << p.seed
                << ',' << (fs::exists(runs / (p.fingerprint + ".json")) ? "done" : "pending") << '\n';
    return 0;
  }
  const auto data = prepare_data(c, a.jobs);
  const auto result = run_sweep(c, data, runs, a.jobs);
  std::size_t diverged = 0;
  for (const auto& r : result.completed) diverged += r.diverged ? 1 : 0;
  std::cout << "completed " << result.completed.size() << ", skipped " << result.skipped << " (already present), "
            << "diverged " << diverged << ", failed " << result.failures.size() << "\nruns dir: " << runs.string()
            << '\n';
  for (const auto& f : result.failures)
    std::cerr << "run " << f.run.fingerprint << " (" << c.schedulers[f.run.scheduler_index].label
              << ", budget " << f.run.budget << ", seed " << f.run.seed << ") failed: " << f.message << '\n';
  return result.failures.empty() ? 0 : kExitRuntime;
}

struct AnalyzeArgs {
  std::string dir;
  std::string csv;
  std::string svg;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const fs::path dir = resolve_runs_dir(a.dir, "");
  const auto report = analyze_sweep(load_records(dir));
  write_report(dir, report);
  if (!a.csv.empty()) std::ofstream(a.csv, std::ios::trunc) << report_csv(report);
  if (!a.svg.empty()) {
    std::vector<LineSeries> lines;
    for (const auto& s : report.schedulers)
      for (const auto& b : {s.budgets.front(), s.budgets.back()}) {
        LineSeries l{s.label + " E=" + std::to_string(b.budget), {}, b.mean_curve};
        for (std::size_t i = 0; i < b.mean_curve.size(); ++i) l.x.push_back(static_cast<double>(i));
        lines.push_back(std::move(l));
      }
    write_svg(a.svg, lines, {"seed-averaged validation loss", "epoch", "loss", true});
  }
  std::cout << report_text(report);
  std::cerr << "wrote " << (dir / "report.csv").string() << ", report.txt, report.meta.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epochlab: learning-rate schedules, learning-curve metrics and training sweeps"};
  app.require_subcommand(1);

  ScheduleArgs sa;
  auto* sched = app.add_subcommand("schedule", "Emit epoch,lr CSV for one scheduler at one or more budgets");
  sched->add_option("--kind", sa.kind, "constant|polynomial|cosine|exponential|hyperbolic|exphyperbolic");
  sched->add_option("--preset", sa.preset, "named preset, e.g. deeponet-exphyperbolic");
  sched->add_option("--eta-init", sa.eta_init, "initial learning rate")->capture_default_str();
  sched->add_option("--eta-inf", sa.eta_inf, "hyperbolic infimum")->capture_default_str();
  sched->add_option("--eta-min", sa.eta_min, "cosine minimum")->capture_default_str();
  sched->add_option("--power", sa.power, "polynomial power")->capture_default_str();
  sched->add_option("--gamma", sa.gamma, "exponential decay factor")->capture_default_str();
  sched->add_option("--upper", sa.upper, "hyperbolic upper bound U")->capture_default_str();
  sched->add_option("--epochs", sa.epochs, "epoch budgets (N = epochs - 1)")->required()->delimiter(',');
  sched->add_option("--out-dir", sa.out_dir, "write <kind>_<epochs>.csv files here instead of stdout");
  sched->add_option("--svg", sa.svg, "also write an SVG chart");

  IlriArgs ia;
  auto* il = app.add_subcommand("ilri", "Relative ILRI differences against a baseline budget");
  il->add_option("--kinds", ia.kinds, "schedulers to tabulate")->delimiter(',')->capture_default_str();
  il->add_option("--epochs", ia.epochs, "epoch budgets")->delimiter(',')->capture_default_str();
  il->add_option("--baseline", ia.baseline, "baseline epoch budget")->capture_default_str();
  il->add_option("--eta-init", ia.eta_init)->capture_default_str();
  il->add_option("--eta-inf", ia.eta_inf)->capture_default_str();
  il->add_option("--eta-min", ia.eta_min)->capture_default_str();
  il->add_option("--power", ia.power)->capture_default_str();
  il->add_option("--gamma", ia.gamma)->capture_default_str();
  il->add_option("--upper", ia.upper)->capture_default_str();
  il->add_flag("--csv", ia.csv, "CSV instead of a table");

  DatasetArgs da;
  auto* ds = app.add_subcommand("dataset", "Generate a dataset directory (meta.json + float64 arrays)");
  ds->add_option("kind", da.kind, "oscillation|grf")->required()->check(CLI::IsMember({"oscillation", "grf"}));
  ds->add_option("--seed", da.seed, "split / sampling seed")->capture_default_str();
  ds->add_option("--out", da.out, "output directory (default data/<kind>)");
  ds->add_option("--functions", da.functions, "GRF function count")->capture_default_str();
  ds->add_flag("--paper-scale", da.full_scale, "accepted for symmetry; dataset sizes are already full scale");
  ds->add_option("--jobs", da.jobs, "worker threads for GRF sampling")->capture_default_str();

  ExperimentArgs ea;
  auto* ex = app.add_subcommand("experiment", "Run (or resume) a training sweep");
  ex->add_option("--config", ea.config, "experiment JSON")->required()->check(CLI::ExistingFile);
  ex->add_flag("--dry-run", ea.dry_run, "print the run matrix and exit");
  ex->add_option("--jobs", ea.jobs, "concurrent runs")->capture_default_str();
  ex->add_option("--runs-dir", ea.runs_dir, "record directory (overrides EPOCHLAB_RUNS_DIR and config)");
  ex->add_flag("--paper-scale", ea.full_scale, "budgets 50..200, five seeds, wider DeepONet");

  AnalyzeArgs aa;
  auto* an = app.add_subcommand("analyze", "Summarise run records into a report");
  an->add_option("dir", aa.dir, "record directory (default EPOCHLAB_RUNS_DIR or runs)");
  an->add_option("--csv", aa.csv, "also copy the CSV report here");
  an->add_option("--svg", aa.svg, "write seed-averaged curves (smallest/largest budget) as SVG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sched->parsed()) return cmd_schedule(sa, *sched);
    if (il->parsed()) return cmd_ilri(ia);
    if (ds->parsed()) return cmd_dataset(da);
    if (ex->parsed()) return cmd_experiment(ea);
    if (an->parsed()) return cmd_analyze(aa);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
