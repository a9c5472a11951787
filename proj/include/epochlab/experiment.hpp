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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "epochlab/dataset_io.hpp"
#include "epochlab/datasets.hpp"
#include "epochlab/metrics.hpp"
#include "epochlab/nn.hpp"
#include "epochlab/regression.hpp"
#include "epochlab/rng.hpp"
#include "epochlab/schedule.hpp"
#include "epochlab/smoothing.hpp"

namespace epochlab {

/// Invalid experiment configuration: schema violations, bad budgets, N > U.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Task { IntegralOperator, OscillationRegression };

inline std::string_view to_string(Task t) {
  return t == Task::IntegralOperator ? "integral_operator" : "oscillation";
}

inline Task parse_task(std::string_view name) {
  if (name == "integral_operator" || name == "operator" || name == "grf") return Task::IntegralOperator;
  if (name == "oscillation" || name == "oscillation_regression") return Task::OscillationRegression;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

struct DatasetRef {
  std::uint64_t seed = 89;
  std::size_t functions = 1000;  // operator task only
  std::string path;              // empty: generate in memory
};

struct NetworkConfig {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t p = 10;  // operator task only
  nn::Activation activation = nn::Activation::GELU;
};

/// A scheduler as configured. `spec.max_epoch` is ignored; each run sets it
/// from its budget.
struct SchedulerEntry {
  std::string label;
  ScheduleSpec spec;
};

inline const std::vector<std::size_t>& desk_budgets() {
  static const std::vector<std::size_t> b = {10, 20, 30, 40};
  return b;
}
inline const std::vector<std::size_t>& full_budgets() {
  static const std::vector<std::size_t> b = {50, 100, 150, 200};
  return b;
}
inline const std::vector<std::uint64_t>& full_seeds() {
  static const std::vector<std::uint64_t> s = {89, 231, 928, 814, 269};
  return s;
}

struct ExperimentConfig {
  Task task = Task::IntegralOperator;
  DatasetRef dataset;
  std::vector<SchedulerEntry> schedulers;
  std::vector<std::size_t> epoch_budgets = desk_budgets();
  std::vector<std::uint64_t> seeds = {89, 231, 928};
  std::size_t batch_size = 100;
  NetworkConfig network;
  nn::OptimizerParams optimizer;
  std::string runs_dir = "runs";

  void validate() const {
    if (schedulers.empty()) throw ConfigError("config needs at least one scheduler");
    if (epoch_budgets.empty()) throw ConfigError("config needs at least one epoch budget");
    if (seeds.empty()) throw ConfigError("config needs at least one seed");
    for (std::size_t i = 0; i < epoch_budgets.size(); ++i) {
      if (epoch_budgets[i] == 0) throw ConfigError("epoch budgets must be positive");
      if (i > 0 && epoch_budgets[i] <= epoch_budgets[i - 1])
        throw ConfigError("epoch budgets must be strictly increasing");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw ConfigError("seeds must be distinct");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (network.hidden.empty()) throw ConfigError("network needs at least one hidden layer");
    for (std::size_t h : network.hidden)
      if (h == 0) throw ConfigError("hidden widths must be positive");
    if (task == Task::IntegralOperator && network.p == 0) throw ConfigError("network.p must be positive");
    if (task == Task::IntegralOperator && dataset.path.empty() && dataset.functions < 2)
      throw ConfigError("dataset.functions must be at least 2");
    try {
      optimizer.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("optimizer: ") + e.what());
    }
    std::set<std::string> labels;
    for (const auto& s : schedulers) {
      if (!labels.insert(s.label).second) throw ConfigError("duplicate scheduler label '" + s.label + "'");
      for (std::size_t b : epoch_budgets) {
        try {
          s.spec.for_epochs(b).validate();
        } catch (const ScheduleError& e) {
          throw ConfigError("scheduler '" + s.label + "' at budget " + std::to_string(b) + ": " + e.what());
        }
      }
    }
  }
};

/// Switches budgets, seeds and network width to the full evaluation protocol.
inline void apply_full_scale(ExperimentConfig& c) {
  c.epoch_budgets = full_budgets();
  c.seeds = full_seeds();
  if (c.task == Task::IntegralOperator) c.network.hidden = {256, 256, 256, 256};
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const nlohmann::json& obj, std::string_view key, const std::string& where) {
  try {
    return obj.at(std::string(key)).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + std::string(key) + ": " + e.what());
  }
}

inline double get_number(const nlohmann::json& obj, std::string_view key, const std::string& where) {
  const auto& v = obj.at(std::string(key));
  if (!v.is_number()) throw ConfigError(where + "." + std::string(key) + " must be a number");
  return v.get<double>();
}

inline bool is_count(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline std::size_t get_count(const nlohmann::json& obj, std::string_view key, const std::string& where) {
  const auto& v = obj.at(std::string(key));
  if (!is_count(v)) throw ConfigError(where + "." + std::string(key) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

inline SchedulerEntry parse_scheduler(const nlohmann::json& j, std::size_t index) {
  const std::string where = "schedulers[" + std::to_string(index) + "]";
  reject_unknown(j, {"preset", "kind", "label", "eta_init", "eta_min", "eta_inf", "power", "gamma", "upper_bound"},
                 where);
  SchedulerEntry e;
  if (j.contains("preset")) {
    const auto name = get_as<std::string>(j, "preset", where);
    const auto preset = find_preset(name);
    if (!preset) throw ConfigError(where + ": unknown preset '" + name + "'");
    e.spec = *preset;
    e.label = name;
    if (j.contains("kind") && parse_schedule_kind(get_as<std::string>(j, "kind", where)) != std::optional(e.spec.kind))
      throw ConfigError(where + ": kind contradicts preset '" + name + "'");
  } else if (j.contains("kind")) {
    const auto name = get_as<std::string>(j, "kind", where);
    const auto kind = parse_schedule_kind(name);
    if (!kind) throw ConfigError(where + ": unknown scheduler kind '" + name + "'");
    e.spec.kind = *kind;
    e.label = std::string(to_string(e.spec.kind));
  } else {
    throw ConfigError(where + " needs 'preset' or 'kind'");
  }
  if (j.contains("eta_init")) e.spec.eta_init = get_number(j, "eta_init", where);
  if (j.contains("eta_min")) e.spec.eta_min = get_number(j, "eta_min", where);
  if (j.contains("eta_inf")) e.spec.eta_inf = get_number(j, "eta_inf", where);
  if (j.contains("power")) e.spec.power = get_number(j, "power", where);
  if (j.contains("gamma")) e.spec.gamma = get_number(j, "gamma", where);
  if (j.contains("upper_bound")) e.spec.upper_bound = get_count(j, "upper_bound", where);
  if (j.contains("label")) e.label = get_as<std::string>(j, "label", where);
  if (e.label.empty()) throw ConfigError(where + ": label must not be empty");
  return e;
}

}  // namespace detail

/// Parses and validates a config document. Unknown keys are rejected at every
/// level; omitted keys take the desk-scale defaults.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail::get_as;
  detail::reject_unknown(j,
                         {"task", "dataset", "schedulers", "epoch_budgets", "seeds", "batch_size", "network",
                          "optimizer", "runs_dir"},
                         "config");
  ExperimentConfig c;
  if (j.contains("task")) c.task = parse_task(get_as<std::string>(j, "task", "config"));
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::reject_unknown(d, {"seed", "functions", "path"}, "dataset");
    if (d.contains("seed")) c.dataset.seed = detail::get_count(d, "seed", "dataset");
    if (d.contains("functions")) c.dataset.functions = detail::get_count(d, "functions", "dataset");
    if (d.contains("path")) c.dataset.path = get_as<std::string>(d, "path", "dataset");
  }
  if (!j.contains("schedulers") || !j.at("schedulers").is_array())
    throw ConfigError("config.schedulers must be a non-empty array");
  for (std::size_t i = 0; i < j.at("schedulers").size(); ++i)
    c.schedulers.push_back(detail::parse_scheduler(j.at("schedulers")[i], i));
  if (j.contains("epoch_budgets")) {
    c.epoch_budgets.clear();
    for (const auto& b : j.at("epoch_budgets")) {
      if (!detail::is_count(b)) throw ConfigError("epoch_budgets must hold positive integers");
      c.epoch_budgets.push_back(b.get<std::size_t>());
    }
  }
  if (j.contains("seeds")) {
    c.seeds.clear();
    for (const auto& s : j.at("seeds")) {
      if (!detail::is_count(s)) throw ConfigError("seeds must hold non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("batch_size")) c.batch_size = detail::get_count(j, "batch_size", "config");
  if (j.contains("network")) {
    const auto& n = j.at("network");
    detail::reject_unknown(n, {"hidden", "p", "activation"}, "network");
    if (n.contains("hidden")) c.network.hidden = get_as<std::vector<std::size_t>>(n, "hidden", "network");
    if (n.contains("p")) c.network.p = detail::get_count(n, "p", "network");
    if (n.contains("activation")) {
      try {
        c.network.activation = nn::parse_activation(get_as<std::string>(n, "activation", "network"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("network.activation: ") + e.what());
      }
    }
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    detail::reject_unknown(o, {"beta1", "beta2", "epsilon", "weight_decay"}, "optimizer");
    if (o.contains("beta1")) c.optimizer.beta1 = detail::get_number(o, "beta1", "optimizer");
    if (o.contains("beta2")) c.optimizer.beta2 = detail::get_number(o, "beta2", "optimizer");
    if (o.contains("epsilon")) c.optimizer.epsilon = detail::get_number(o, "epsilon", "optimizer");
    if (o.contains("weight_decay")) c.optimizer.weight_decay = detail::get_number(o, "weight_decay", "optimizer");
  }
  if (j.contains("runs_dir")) c.runs_dir = get_as<std::string>(j, "runs_dir", "config");
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Fingerprints and records
// ---------------------------------------------------------------------------

/// The parameters that matter for `spec.kind`, as JSON.
inline nlohmann::json schedule_params_json(const ScheduleSpec& s) {
  nlohmann::json p = {{"eta_init", s.eta_init}};
  switch (s.kind) {
    case ScheduleKind::Constant: break;
    case ScheduleKind::Polynomial:
      p["power"] = s.power;
      p["max_epoch"] = s.max_epoch;
      break;
    case ScheduleKind::CosineAnnealing:
      p["eta_min"] = s.eta_min;
      p["max_epoch"] = s.max_epoch;
      break;
    case ScheduleKind::Exponential: p["gamma"] = s.gamma; break;
    case ScheduleKind::Hyperbolic:
    case ScheduleKind::ExpHyperbolic:
      p["eta_inf"] = s.eta_inf;
      p["max_epoch"] = s.max_epoch;
      p["upper_bound"] = s.upper_bound;
      break;
  }
  return p;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex16(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Everything that determines a run's curves, in canonical (key-sorted) form.
inline nlohmann::json run_identity(const ExperimentConfig& c, const SchedulerEntry& s, std::uint64_t seed,
                                   std::size_t budget) {
  const ScheduleSpec spec = s.spec.for_epochs(budget);
  return {
      {"record_format", 1},
      {"task", to_string(c.task)},
      {"dataset", {{"seed", c.dataset.seed}, {"functions", c.dataset.functions}, {"path", c.dataset.path}}},
      {"network",
       {{"hidden", c.network.hidden}, {"p", c.network.p}, {"activation", nn::to_string(c.network.activation)}}},
      {"optimizer",
       {{"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon},
        {"weight_decay", c.optimizer.weight_decay}}},
      {"batch_size", c.batch_size},
      {"scheduler", {{"label", s.label}, {"kind", to_string(spec.kind)}, {"params", schedule_params_json(spec)}}},
      {"seed", seed},
      {"budget", budget},
      {"init", nn::kInitScheme},
      {"rng", kRngAlgorithm},
  };
}

inline std::string run_fingerprint(const ExperimentConfig& c, const SchedulerEntry& s, std::uint64_t seed,
                                   std::size_t budget) {
  return hex16(fnv1a64(run_identity(c, s, seed, budget).dump()));
}

struct RunRecord {
  std::string fingerprint;
  std::string scheduler_label;
  ScheduleSpec scheduler;  // max_epoch set for this budget
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  std::vector<double> lr;
  std::vector<double> val_loss;
  bool diverged = false;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const {
    return {
        {"fingerprint", fingerprint},
        {"scheduler",
         {{"label", scheduler_label}, {"kind", to_string(scheduler.kind)}, {"params", schedule_params_json(scheduler)}}},
        {"seed", seed},
        {"budget", budget},
        {"lr", lr},
        {"val_loss", val_loss},
        {"diverged", diverged},
        {"wall_seconds", wall_seconds},
    };
  }

  static RunRecord from_json(const nlohmann::json& j) {
    RunRecord r;
    try {
      r.fingerprint = j.at("fingerprint").get<std::string>();
      const auto& s = j.at("scheduler");
      r.scheduler_label = s.at("label").get<std::string>();
      const auto kind = parse_schedule_kind(s.at("kind").get<std::string>());
      if (!kind) throw std::runtime_error("run record has unknown scheduler kind");
      r.scheduler.kind = *kind;
      const auto& p = s.at("params");
      r.scheduler.eta_init = p.at("eta_init").get<double>();
      r.scheduler.eta_min = p.value("eta_min", r.scheduler.eta_min);
      r.scheduler.eta_inf = p.value("eta_inf", r.scheduler.eta_inf);
      r.scheduler.power = p.value("power", r.scheduler.power);
      r.scheduler.gamma = p.value("gamma", r.scheduler.gamma);
      r.scheduler.max_epoch = p.value("max_epoch", r.scheduler.max_epoch);
      r.scheduler.upper_bound = p.value("upper_bound", r.scheduler.upper_bound);
      r.seed = j.at("seed").get<std::uint64_t>();
      r.budget = j.at("budget").get<std::size_t>();
      r.lr = j.at("lr").get<std::vector<double>>();
      r.val_loss = j.at("val_loss").get<std::vector<double>>();
      r.diverged = j.at("diverged").get<bool>();
      r.wall_seconds = j.at("wall_seconds").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(std::string("malformed run record: ") + e.what());
    }
    if (r.lr.size() != r.val_loss.size()) throw std::runtime_error("run record " + r.fingerprint + ": ragged series");
    if (!r.diverged && r.lr.size() != r.budget)
      throw std::runtime_error("run record " + r.fingerprint + ": series shorter than budget without divergence");
    return r;
  }
};

inline bool is_record_filename(const std::filesystem::path& p) {
  const std::string stem = p.stem().string();
  return p.extension() == ".json" && stem.size() == 16 &&
         std::all_of(stem.begin(), stem.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

/// Writes `<dir>/<fingerprint>.json` atomically (temp file, then rename).
inline void save_record(const std::filesystem::path& dir, const RunRecord& r) {
  std::filesystem::create_directories(dir);
  const auto final_path = dir / (r.fingerprint + ".json");
  const auto tmp = dir / (r.fingerprint + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << r.to_json().dump(1) << '\n';
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

/// All records in `dir`, sorted by fingerprint.
inline std::vector<RunRecord> load_records(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("no run directory at " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && is_record_filename(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      out.push_back(RunRecord::from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct OperatorData {
  OperatorSplit split;
  Eigen::MatrixXd train_u, train_g, val_u, val_g;
  Eigen::VectorXd y;
};

struct SequenceData {
  SequenceSplit split;
  Eigen::MatrixXd train_x, train_y, val_x, val_y;
};

using ExperimentData = std::variant<OperatorData, SequenceData>;

/// Loads or generates the configured dataset and splits it with the dataset seed.
inline ExperimentData prepare_data(const ExperimentConfig& c, unsigned jobs = 1) {
  if (c.task == Task::IntegralOperator) {
    OperatorDataset full;
    if (!c.dataset.path.empty()) {
      full = load_operator_dataset(c.dataset.path);
    } else {
      GrfSpec g;
      g.function_count = c.dataset.functions;
      full = grf_sample(g, c.dataset.seed, jobs);
    }
    OperatorData d;
    d.split = split_operator_dataset(full, c.dataset.seed);
    d.train_u = d.split.train.u;
    d.train_g = d.split.train.g;
    d.val_u = d.split.validation.u;
    d.val_g = d.split.validation.g;
    d.y = Eigen::Map<const Eigen::VectorXd>(d.split.train.targets.data(),
                                            static_cast<Eigen::Index>(d.split.train.targets.size()));
    return d;
  }
  SequenceData d;
  d.split = !c.dataset.path.empty()
                ? load_oscillation_dataset(c.dataset.path)
                : normalize_and_split(build_oscillation_dataset(default_damping_ratios()), c.dataset.seed);
  d.train_x = d.split.train.inputs;
  d.train_y = d.split.train.labels;
  d.val_x = d.split.validation.inputs;
  d.val_y = d.split.validation.labels;
  return d;
}

namespace detail {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace detail

/// One training run. Deterministic in (config, scheduler, seed, budget):
/// weights come from the init stream of `seed`, and epoch e shuffles with the
/// shuffle stream (seed, e). A non-finite loss or gradient ends the run and
/// returns the epochs completed so far with `diverged` set.
inline RunRecord run_single(const ExperimentConfig& c, const ExperimentData& data, const SchedulerEntry& scheduler,
                            std::uint64_t seed, std::size_t budget) {
  if (budget == 0) throw ConfigError("epoch budget must be positive");
  ScheduleSpec spec;
  try {
    spec = scheduler.spec.for_epochs(budget);
    spec.validate();
  } catch (const ScheduleError& e) {
    throw ConfigError("scheduler '" + scheduler.label + "' at budget " + std::to_string(budget) + ": " + e.what());
  }
  if ((c.task == Task::IntegralOperator) != std::holds_alternative<OperatorData>(data))
    throw ConfigError("dataset does not match task " + std::string(to_string(c.task)));

  const auto started = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.fingerprint = run_fingerprint(c, scheduler, seed, budget);
  rec.scheduler_label = scheduler.label;
  rec.scheduler = spec;
  rec.seed = seed;
  rec.budget = budget;

  const std::size_t train_count = std::visit(
      [](const auto& d) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, OperatorData>)
          return static_cast<std::size_t>(d.train_u.rows());
        else
          return static_cast<std::size_t>(d.train_x.rows());
      },
      data);

  // Model setup.
  std::optional<nn::DeepONetSpec> onet;
  std::optional<nn::DenseNetworkSpec> mlp;
  Eigen::VectorXd init;
  if (const auto* od = std::get_if<OperatorData>(&data)) {
    onet = nn::DeepONetSpec::make(static_cast<std::size_t>(od->train_u.cols()), c.network.hidden, c.network.p, seed,
                                  c.network.activation);
    init = nn::init_deeponet(*onet);
  } else {
    const auto& sd = std::get<SequenceData>(data);
    std::vector<std::size_t> widths{static_cast<std::size_t>(sd.train_x.cols())};
    widths.insert(widths.end(), c.network.hidden.begin(), c.network.hidden.end());
    widths.push_back(static_cast<std::size_t>(sd.train_y.cols()));
    mlp = nn::DenseNetworkSpec::uniform(widths, c.network.activation, seed);
    init = nn::init_dense(*mlp);
  }
  nn::ParameterState state(std::move(init));

  auto batch_step = [&](std::span<const std::size_t> rows, double lr) {
    nn::LossGradient lg;
    if (onet) {
      const auto& od = std::get<OperatorData>(data);
      lg = nn::loss_and_gradient(*onet, state.view(), detail::take_rows(od.train_u, rows), od.y,
                                 detail::take_rows(od.train_g, rows));
    } else {
      const auto& sd = std::get<SequenceData>(data);
      lg = nn::loss_and_gradient(*mlp, state.view(), detail::take_rows(sd.train_x, rows),
                                 detail::take_rows(sd.train_y, rows));
    }
    if (!std::isfinite(lg.loss)) throw nn::NonFiniteGradientError("non-finite training loss");
    nn::adamw_step(state, lg.grad, lr, c.optimizer);
  };
  auto validation_loss = [&]() {
    if (onet) {
      const auto& od = std::get<OperatorData>(data);
      return nn::mse(nn::forward_deeponet_batch(*onet, state.view(), od.val_u, od.y), od.val_g);
    }
    const auto& sd = std::get<SequenceData>(data);
    return nn::mse(nn::forward_dense(*mlp, state.view(), sd.val_x), sd.val_y);
  };

  ScheduleStepper stepper(spec);
  std::vector<std::size_t> order(train_count);
  for (std::size_t e = 0; e < budget; ++e) {
    const double lr = stepper.lr();
    for (std::size_t i = 0; i < train_count; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(seed, stream::kShuffle, e));
    shuffle_rng.shuffle(order);
    double val = std::numeric_limits<double>::quiet_NaN();
    try {
      for (std::size_t start = 0; start < train_count; start += c.batch_size) {
        const std::size_t len = std::min(c.batch_size, train_count - start);
        batch_step(std::span<const std::size_t>(order.data() + start, len), lr);
      }
      val = validation_loss();
    } catch (const nn::NonFiniteGradientError&) {
      rec.diverged = true;
    }
    if (!std::isfinite(val)) rec.diverged = true;
    if (rec.diverged) break;
    rec.lr.push_back(lr);
    rec.val_loss.push_back(val);
    if (stepper.can_step() && e + 1 < budget) stepper.step();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct PlannedRun {
  std::size_t scheduler_index = 0;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  std::string fingerprint;
};

/// The Cartesian product schedulers x budgets x seeds, in that nesting order.
inline std::vector<PlannedRun> plan_sweep(const ExperimentConfig& c) {
  c.validate();
  std::vector<PlannedRun> plan;
  for (std::size_t s = 0; s < c.schedulers.size(); ++s)
    for (std::size_t b : c.epoch_budgets)
      for (std::uint64_t seed : c.seeds) plan.push_back({s, seed, b, run_fingerprint(c, c.schedulers[s], seed, b)});
  return plan;
}

struct RunFailure {
  PlannedRun run;
  std::string message;
};

struct SweepResult {
  std::vector<RunRecord> completed;  // run in this call, in plan order
  std::size_t skipped = 0;           // already on disk
  std::vector<RunFailure> failures;
};

/// Runs every planned record not yet present in `runs_dir`, writing each as it
/// finishes. Failures are collected per run and do not stop the sweep.
inline SweepResult run_sweep(const ExperimentConfig& c, const ExperimentData& data,
                             const std::filesystem::path& runs_dir, unsigned jobs = 1) {
  const auto plan = plan_sweep(c);
  std::vector<std::size_t> pending;
  SweepResult result;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (std::filesystem::exists(runs_dir / (plan[i].fingerprint + ".json")))
      ++result.skipped;
    else
      pending.push_back(i);
  }
  std::vector<std::optional<RunRecord>> done(pending.size());
  std::vector<std::optional<std::string>> errors(pending.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < pending.size(); k = next++) {
      const PlannedRun& run = plan[pending[k]];
      try {
        RunRecord r = run_single(c, data, c.schedulers[run.scheduler_index], run.seed, run.budget);
        save_record(runs_dir, r);
        done[k] = std::move(r);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(pending.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < pending.size(); ++k) {
    if (done[k]) result.completed.push_back(std::move(*done[k]));
    if (errors[k]) result.failures.push_back({plan[pending[k]], *errors[k]});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

struct BudgetSummary {
  std::size_t budget = 0;
  std::size_t seeds = 0;       // non-diverged runs averaged
  std::size_t diverged = 0;    // runs left out
  double mean_endpoint = 0.0;  // mean final validation loss
  std::vector<double> mean_curve;
};

struct SchedulerSummary {
  std::string label;
  ScheduleKind kind = ScheduleKind::Constant;
  std::vector<BudgetSummary> budgets;
  ImprovementStats improvement;
  PowerRegression regression;  // NaN fields with fewer than three budgets
  double slcd = 0.0;
  SmoothingSpec slcd_smoothing;
};

struct SweepReport {
  std::vector<SchedulerSummary> schedulers;
  nlohmann::json metadata;
};

inline constexpr std::string_view kSlcdMode = "seed-averaged validation-loss curves, smallest vs largest budget";

namespace detail {

/// SG(9, 3) unless the shorter curve is too short, then the widest odd window
/// that fits with the order capped below it.
inline SmoothingSpec slcd_smoothing_for(std::size_t shortest) {
  if (shortest >= 9) return SmoothingSpec::savitzky_golay(9, 3);
  if (shortest < 3) return SmoothingSpec::identity();
  const std::size_t w = shortest % 2 == 1 ? shortest : shortest - 1;
  return SmoothingSpec::savitzky_golay(w, std::min<std::size_t>(3, w - 1));
}

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline std::string fmt_fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace detail

/// Table-style summary per scheduler label. Pure in the record set: the input
/// order does not matter and the same records give the same report.
inline SweepReport analyze_sweep(std::vector<RunRecord> records) {
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.scheduler_label, a.budget, a.seed, a.fingerprint) <
           std::tie(b.scheduler_label, b.budget, b.seed, b.fingerprint);
  });
  std::map<std::string, std::map<std::size_t, std::vector<const RunRecord*>>> groups;
  for (const auto& r : records) groups[r.scheduler_label][r.budget].push_back(&r);

  SweepReport report;
  std::size_t excluded = 0;
  for (const auto& [label, by_budget] : groups) {
    SchedulerSummary s;
    s.label = label;
    s.kind = by_budget.begin()->second.front()->scheduler.kind;
    for (const auto& [budget, runs] : by_budget) {
      BudgetSummary b;
      b.budget = budget;
      b.mean_curve.assign(budget, 0.0);
      for (const RunRecord* r : runs) {
        if (r->diverged || r->val_loss.size() != budget) {
          ++b.diverged;
          continue;
        }
        for (std::size_t i = 0; i < budget; ++i) b.mean_curve[i] += r->val_loss[i];
        ++b.seeds;
      }
      excluded += b.diverged;
      if (b.seeds == 0) throw MetricError("scheduler '" + label + "' has no finished run at budget " +
                                          std::to_string(budget));
      for (double& v : b.mean_curve) v /= static_cast<double>(b.seeds);
      b.mean_endpoint = b.mean_curve.back();
      s.budgets.push_back(std::move(b));
    }
    if (s.budgets.size() < 2)
      throw MetricError("scheduler '" + label + "' needs records for at least two budgets");

    std::vector<double> xs, ys;
    for (const auto& b : s.budgets) {
      xs.push_back(static_cast<double>(b.budget));
      ys.push_back(b.mean_endpoint);
    }
    const std::size_t gap = s.budgets.size() > 1 ? s.budgets[1].budget - s.budgets[0].budget : 0;
    s.improvement = improvement_stats(ys, false, gap);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    s.regression = xs.size() >= 3 ? power_regression(xs, ys) : PowerRegression{nan, nan, nan, nan};

    const auto& lo = s.budgets.front();
    const auto& hi = s.budgets.back();
    s.slcd_smoothing = detail::slcd_smoothing_for(std::min(lo.mean_curve.size(), hi.mean_curve.size()));
    s.slcd = slcd(LearningCurve{lo.mean_curve, label + "@" + std::to_string(lo.budget)},
                  LearningCurve{hi.mean_curve, label + "@" + std::to_string(hi.budget)}, s.slcd_smoothing)
                 .slcd;
    report.schedulers.push_back(std::move(s));
  }
  if (report.schedulers.empty()) throw MetricError("no run records to analyze");

  nlohmann::json smoothing = nlohmann::json::object();
  for (const auto& s : report.schedulers) smoothing[s.label] = s.slcd_smoothing.describe();
  report.metadata = {
      {"records", records.size()},
      {"excluded_diverged", excluded},
      {"endpoint", "final-epoch validation MSE, averaged over seeds"},
      {"slcd_mode", kSlcdMode},
      {"slcd_smoothing", smoothing},
      {"improvement", "mean/population-std of (prev - cur) / prev between consecutive budgets, percent"},
      {"regression", "ln(endpoint) = A + B ln(budget); needs >= 3 budgets, else nan"},
  };
  return report;
}

inline std::string report_csv(const SweepReport& r) {
  std::ostringstream os;
  os << "scheduler,budget,mean_endpoint,mu,sigma,B,R2,p,slcd\n";
  for (const auto& s : r.schedulers)
    for (const auto& b : s.budgets)
      os << s.label << ',' << b.budget << ',' << detail::fmt(b.mean_endpoint) << ','
         << detail::fmt(s.improvement.mean_pct) << ',' << detail::fmt(s.improvement.std_pct) << ','
         << detail::fmt(s.regression.B) << ',' << detail::fmt(s.regression.r_squared) << ','
         << detail::fmt(s.regression.p_value) << ',' << detail::fmt(s.slcd) << '\n';
  return os.str();
}

/// One row per scheduler: endpoint per budget, then mu, sigma, B, R2, p, sLCD.
inline std::string report_text(const SweepReport& r) {
  std::set<std::size_t> budgets;
  for (const auto& s : r.schedulers)
    for (const auto& b : s.budgets) budgets.insert(b.budget);
  std::size_t label_width = 9;
  for (const auto& s : r.schedulers) label_width = std::max(label_width, s.label.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(label_width)) << "scheduler";
  for (std::size_t b : budgets) os << "  " << std::right << std::setw(11) << ("E=" + std::to_string(b));
  for (const char* h : {"mu(%)", "sigma(%)", "B", "R2", "p", "sLCD"}) os << "  " << std::setw(10) << h;
  os << '\n';
  for (const auto& s : r.schedulers) {
    os << std::left << std::setw(static_cast<int>(label_width)) << s.label << std::right;
    for (std::size_t b : budgets) {
      const auto it = std::find_if(s.budgets.begin(), s.budgets.end(),
                                   [&](const BudgetSummary& x) { return x.budget == b; });
      os << "  " << std::setw(11) << (it == s.budgets.end() ? "-" : detail::fmt_fixed(it->mean_endpoint, 4));
    }
    for (double v : {s.improvement.mean_pct, s.improvement.std_pct, s.regression.B, s.regression.r_squared,
                     s.regression.p_value, s.slcd})
      os << "  " << std::setw(10) << detail::fmt_fixed(v, 4);
    os << '\n';
  }
  os << "sLCD: " << kSlcdMode << '\n';
  return os.str();
}

/// Writes report.csv, report.txt and report.meta.json into `dir`.
inline void write_report(const std::filesystem::path& dir, const SweepReport& r) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.csv", std::ios::trunc) << report_csv(r);
  std::ofstream(dir / "report.txt", std::ios::trunc) << report_text(r);
  std::ofstream(dir / "report.meta.json", std::ios::trunc) << r.metadata.dump(1) << '\n';
}

}  // namespace epochlab
