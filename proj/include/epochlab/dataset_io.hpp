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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "epochlab/datasets.hpp"
#include "epochlab/rng.hpp"

namespace epochlab {

inline constexpr std::string_view kDatasetFormat = "epochlab-dataset/1";
inline constexpr std::string_view kArrayDtype = "float64-le";
inline constexpr std::string_view kKernelForm = "exp(-(x-x')^2/(2*l^2))";

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace detail

/// Writes doubles as raw little-endian IEEE-754 binary64.
inline void write_f64(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open " + path.string() + " for writing");
  for (double v : values) {
    const std::uint64_t le = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
    char bytes[8];
    std::memcpy(bytes, &le, 8);
    out.write(bytes, 8);
  }
  if (!out) throw DatasetError("write to " + path.string() + " failed");
}

inline std::vector<double> read_f64(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    char bytes[8];
    if (!in.read(bytes, 8)) throw DatasetError(path.string() + " is shorter than its declared shape");
    std::uint64_t le = 0;
    std::memcpy(&le, bytes, 8);
    values[i] = std::bit_cast<double>(detail::to_little_endian(le));
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw DatasetError(path.string() + " is longer than its declared shape");
  return values;
}

namespace detail {

inline nlohmann::json array_entry(const std::string& name, std::vector<std::size_t> shape,
                                  std::vector<std::size_t> logical_shape = {}) {
  nlohmann::json e = {{"name", name}, {"file", name + ".f64"}, {"dtype", kArrayDtype}, {"shape", shape}};
  if (!logical_shape.empty()) e["logical_shape"] = logical_shape;
  return e;
}

inline void write_matrix(const std::filesystem::path& dir, const std::string& name, const RowMatrix& m) {
  write_f64(dir / (name + ".f64"), std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

inline RowMatrix read_matrix(const std::filesystem::path& dir, const nlohmann::json& entry) {
  const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
  if (shape.empty()) throw DatasetError("array without a shape in meta.json");
  std::size_t rows = shape[0];
  std::size_t cols = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) cols *= shape[i];
  if (shape.size() == 1) {
    cols = shape[0];
    rows = 1;
  }
  const auto values = read_f64(dir / entry.at("file").get<std::string>(), rows * cols);
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::memcpy(m.data(), values.data(), values.size() * sizeof(double));
  return m;
}

inline const nlohmann::json& find_array(const nlohmann::json& meta, std::string_view name) {
  for (const auto& e : meta.at("arrays"))
    if (e.at("name").get<std::string>() == name) return e;
  throw DatasetError("meta.json declares no array named " + std::string(name));
}

inline void write_meta(const std::filesystem::path& dir, const nlohmann::json& meta) {
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

inline std::vector<std::size_t> seq_shape(const RowMatrix& m) {
  return {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), 1};
}

}  // namespace detail

inline nlohmann::json read_dataset_meta(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw DatasetError("no meta.json in " + dir.string());
  nlohmann::json meta = nlohmann::json::parse(in);
  if (meta.value("format", "") != kDatasetFormat) throw DatasetError("unsupported dataset format in " + dir.string());
  return meta;
}

/// Writes the normalised, split oscillation dataset.
inline nlohmann::json save_oscillation_dataset(const std::filesystem::path& dir, const SequenceSplit& split,
                                               std::uint64_t seed, std::span<const double> damping_ratios) {
  std::filesystem::create_directories(dir);
  const OscillatorSpec base;
  nlohmann::json meta = {
      {"format", kDatasetFormat},
      {"kind", "oscillation"},
      {"seed", seed},
      {"generator", kRngAlgorithm},
      {"spec",
       {{"mass", base.mass},
        {"stiffness", base.stiffness},
        {"damping_ratios", std::vector<double>(damping_ratios.begin(), damping_ratios.end())},
        {"t_span", {0.0, base.t_end}},
        {"dt", base.dt},
        {"u0", base.u0},
        {"v0", base.v0},
        {"integrator", "newmark-beta(beta=0.25,gamma=0.5)"},
        {"history", split.train.inputs.cols()},
        {"horizon", split.train.labels.cols()},
        {"train_fraction", 0.8}}},
      {"counts",
       {{"pairs", split.train.size() + split.validation.size()},
        {"train", split.train.size()},
        {"validation", split.validation.size()}}},
      {"normalization", {{"min", split.train.norm_min}, {"max", split.train.norm_max}}},
      {"arrays",
       {detail::array_entry("train_inputs", detail::seq_shape(split.train.inputs)),
        detail::array_entry("train_labels", detail::seq_shape(split.train.labels)),
        detail::array_entry("validation_inputs", detail::seq_shape(split.validation.inputs)),
        detail::array_entry("validation_labels", detail::seq_shape(split.validation.labels))}},
  };
  detail::write_matrix(dir, "train_inputs", split.train.inputs);
  detail::write_matrix(dir, "train_labels", split.train.labels);
  detail::write_matrix(dir, "validation_inputs", split.validation.inputs);
  detail::write_matrix(dir, "validation_labels", split.validation.labels);
  detail::write_meta(dir, meta);
  return meta;
}

inline SequenceSplit load_oscillation_dataset(const std::filesystem::path& dir) {
  const nlohmann::json meta = read_dataset_meta(dir);
  if (meta.at("kind") != "oscillation") throw DatasetError(dir.string() + " is not an oscillation dataset");
  const double lo = meta.at("normalization").at("min").get<double>();
  const double hi = meta.at("normalization").at("max").get<double>();
  SequenceSplit s;
  s.train = {detail::read_matrix(dir, detail::find_array(meta, "train_inputs")),
             detail::read_matrix(dir, detail::find_array(meta, "train_labels")), lo, hi};
  s.validation = {detail::read_matrix(dir, detail::find_array(meta, "validation_inputs")),
                  detail::read_matrix(dir, detail::find_array(meta, "validation_labels")), lo, hi};
  return s;
}

/// Writes an (unsplit) operator dataset. The target grid is stored once.
inline nlohmann::json save_operator_dataset(const std::filesystem::path& dir, const OperatorDataset& data,
                                            const GrfSpec& spec, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const std::size_t count = data.size();
  nlohmann::json meta = {
      {"format", kDatasetFormat},
      {"kind", "grf"},
      {"seed", seed},
      {"generator", kRngAlgorithm},
      {"spec",
       {{"sensor_count", spec.sensor_count},
        {"target_count", spec.target_count},
        {"length_scale_range", {spec.length_scale_min, spec.length_scale_max}},
        {"function_count", spec.function_count},
        {"jitter", spec.jitter},
        {"max_jitter", spec.max_jitter},
        {"kernel", kKernelForm},
        {"labels", "cumulative trapezoid of u on the sensor grid"}}},
      {"counts", {{"functions", count}, {"targets_per_function", data.targets.size()}}},
      {"arrays",
       {detail::array_entry("u", {count, data.sensors.size()}),
        detail::array_entry("y", {data.targets.size()}, {count, data.targets.size()}),
        detail::array_entry("g", {count, data.targets.size()}),
        detail::array_entry("length_scales", {count}),
        detail::array_entry("jitters", {count})}},
  };
  detail::write_matrix(dir, "u", data.u);
  write_f64(dir / "y.f64", data.targets);
  detail::write_matrix(dir, "g", data.g);
  write_f64(dir / "length_scales.f64", data.length_scales);
  write_f64(dir / "jitters.f64", data.jitters);
  detail::write_meta(dir, meta);
  return meta;
}

inline OperatorDataset load_operator_dataset(const std::filesystem::path& dir) {
  const nlohmann::json meta = read_dataset_meta(dir);
  if (meta.at("kind") != "grf") throw DatasetError(dir.string() + " is not an operator dataset");
  OperatorDataset d;
  d.u = detail::read_matrix(dir, detail::find_array(meta, "u"));
  d.g = detail::read_matrix(dir, detail::find_array(meta, "g"));
  const std::size_t count = static_cast<std::size_t>(d.u.rows());
  d.targets = read_f64(dir / "y.f64", static_cast<std::size_t>(d.g.cols()));
  d.sensors = uniform_grid(static_cast<std::size_t>(d.u.cols()));
  d.length_scales = read_f64(dir / "length_scales.f64", count);
  d.jitters = read_f64(dir / "jitters.f64", count);
  return d;
}

}  // namespace epochlab
