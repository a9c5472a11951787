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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "epochlab/rng.hpp"

namespace epochlab::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by adamw_step when a gradient entry is NaN or infinite.
class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation { ReLU, GELU, None };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::GELU: return "gelu";
    case Activation::None: return "none";
  }
  return "unknown";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "gelu") return Activation::GELU;
  if (name == "none" || name == "identity") return Activation::None;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

namespace detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

// GELU uses the tanh approximation.
inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::GELU: return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
    case Activation::None: return x;
  }
  return x;
}

inline double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::GELU: {
      const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    }
    case Activation::None: return 1.0;
  }
  return 1.0;
}

}  // namespace detail

/// Fully connected network. `activations` has one entry per hidden layer
/// (layer_widths.size() - 2); the output layer is always linear.
struct DenseNetworkSpec {
  std::vector<std::size_t> layer_widths;
  std::vector<Activation> activations;
  std::uint64_t init_seed = 0;

  static DenseNetworkSpec uniform(std::vector<std::size_t> widths, Activation hidden, std::uint64_t seed) {
    DenseNetworkSpec s;
    s.layer_widths = std::move(widths);
    s.activations.assign(s.layer_widths.size() >= 2 ? s.layer_widths.size() - 2 : 0, hidden);
    s.init_seed = seed;
    return s;
  }

  std::size_t layers() const { return layer_widths.size() - 1; }
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }

  Activation activation_of(std::size_t layer) const {
    return layer + 1 < layers() ? activations[layer] : Activation::None;
  }

  void validate() const {
    if (layer_widths.size() < 2) throw ShapeError("a dense network needs at least two widths");
    for (std::size_t w : layer_widths)
      if (w == 0) throw ShapeError("layer widths must be positive");
    if (activations.size() != layer_widths.size() - 2)
      throw ShapeError("need exactly one activation per hidden layer");
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
      total += layer_widths[l] * layer_widths[l + 1] + layer_widths[l + 1];
    return total;
  }
};

/// Intermediate values of one forward pass, kept for the backward pass.
struct DenseTape {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer, batch x in
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer, batch x out
};

namespace detail {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

inline void check_params(const DenseNetworkSpec& spec, std::size_t available) {
  if (available != spec.parameter_count())
    throw ShapeError("parameter vector has " + std::to_string(available) + " entries, network needs " +
                     std::to_string(spec.parameter_count()));
}

}  // namespace detail

/// Rows of `input` are samples. Layout of `params`, per layer: weights
/// (out x in, column-major) then biases (out).
inline Eigen::MatrixXd forward_dense(const DenseNetworkSpec& spec, std::span<const double> params,
                                     const Eigen::MatrixXd& input, DenseTape* tape = nullptr) {
  spec.validate();
  detail::check_params(spec, params.size());
  if (static_cast<std::size_t>(input.cols()) != spec.input_width())
    throw ShapeError("input width " + std::to_string(input.cols()) + " does not match network input " +
                     std::to_string(spec.input_width()));
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Eigen::MatrixXd x = input;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.layer_widths[l]);
    const auto out = static_cast<Eigen::Index>(spec.layer_widths[l + 1]);
    const detail::ConstMatMap w(params.data() + offset, out, in);
    offset += static_cast<std::size_t>(out * in);
    const detail::ConstVecMap b(params.data() + offset, out);
    offset += static_cast<std::size_t>(out);

    Eigen::MatrixXd z = x * w.transpose();
    z.rowwise() += b.transpose();
    const Activation act = spec.activation_of(l);
    if (tape) {
      tape->inputs.push_back(std::move(x));
      tape->pre.push_back(z);
    }
    x = act == Activation::None ? std::move(z) : z.unaryExpr([act](double v) { return detail::activate(act, v); }).eval();
  }
  return x;
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output). Returns
/// d(loss)/d(input).
inline Eigen::MatrixXd backward_dense(const DenseNetworkSpec& spec, std::span<const double> params,
                                      const DenseTape& tape, const Eigen::MatrixXd& output_grad,
                                      std::span<double> grad) {
  detail::check_params(spec, params.size());
  detail::check_params(spec, grad.size());
  if (tape.pre.size() != spec.layers()) throw ShapeError("tape does not belong to this network");

  std::vector<std::size_t> offsets(spec.layers());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    offsets[l] = offset;
    offset += spec.layer_widths[l] * spec.layer_widths[l + 1] + spec.layer_widths[l + 1];
  }

  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = spec.layers(); l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(spec.layer_widths[l]);
    const auto out = static_cast<Eigen::Index>(spec.layer_widths[l + 1]);
    const Activation act = spec.activation_of(l);
    if (act != Activation::None)
      delta.array() *= tape.pre[l].unaryExpr([act](double v) { return detail::activate_derivative(act, v); }).array();

    detail::MatMap gw(grad.data() + offsets[l], out, in);
    detail::VecMap gb(grad.data() + offsets[l] + static_cast<std::size_t>(out * in), out);
    gw.noalias() += delta.transpose() * tape.inputs[l];
    gb.noalias() += delta.colwise().sum().transpose();

    const detail::ConstMatMap w(params.data() + offsets[l], out, in);
    delta = delta * w;
  }
  return delta;
}

/// Glorot-uniform weights, zero biases.
inline Eigen::VectorXd init_dense(const DenseNetworkSpec& spec, std::uint64_t stream_index = 0) {
  spec.validate();
  Eigen::VectorXd params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.parameter_count()));
  Rng rng(derive_seed(spec.init_seed, stream::kInit, stream_index));
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const double fan_in = static_cast<double>(spec.layer_widths[l]);
    const double fan_out = static_cast<double>(spec.layer_widths[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    const auto weights = static_cast<Eigen::Index>(spec.layer_widths[l] * spec.layer_widths[l + 1]);
    for (Eigen::Index i = 0; i < weights; ++i) params(offset + i) = rng.uniform(-limit, limit);
    offset += weights + static_cast<Eigen::Index>(spec.layer_widths[l + 1]);
  }
  return params;
}

inline constexpr std::string_view kInitScheme = "glorot-uniform weights, zero biases";

// ---------------------------------------------------------------------------
// DeepONet
// ---------------------------------------------------------------------------

/// Branch net (sensor values -> p) and trunk net (query point -> p) joined by
/// an inner product. Parameters are the branch block followed by the trunk.
struct DeepONetSpec {
  DenseNetworkSpec branch;
  DenseNetworkSpec trunk;
  std::size_t p = 10;

  /// Branch sensors -> hidden... -> p, trunk 1 -> hidden... -> p, both GELU.
  static DeepONetSpec make(std::size_t sensors, const std::vector<std::size_t>& hidden, std::size_t p,
                           std::uint64_t seed, Activation act = Activation::GELU) {
    std::vector<std::size_t> bw{sensors};
    std::vector<std::size_t> tw{1};
    for (std::size_t h : hidden) {
      bw.push_back(h);
      tw.push_back(h);
    }
    bw.push_back(p);
    tw.push_back(p);
    return {DenseNetworkSpec::uniform(bw, act, seed), DenseNetworkSpec::uniform(tw, act, seed), p};
  }

  void validate() const {
    branch.validate();
    trunk.validate();
    if (p == 0) throw ShapeError("DeepONet needs p > 0");
    if (branch.output_width() != p || trunk.output_width() != p)
      throw ShapeError("branch and trunk outputs must both have width p");
    if (trunk.input_width() != 1) throw ShapeError("trunk input must be a scalar query point");
  }

  std::size_t parameter_count() const { return branch.parameter_count() + trunk.parameter_count(); }
};

struct DeepONetTape {
  DenseTape branch;
  DenseTape trunk;
  Eigen::MatrixXd branch_out;  // batch x p
  Eigen::MatrixXd trunk_out;   // targets x p
};

inline Eigen::VectorXd init_deeponet(const DeepONetSpec& spec) {
  spec.validate();
  Eigen::VectorXd params(static_cast<Eigen::Index>(spec.parameter_count()));
  const Eigen::VectorXd b = init_dense(spec.branch, 0);
  const Eigen::VectorXd t = init_dense(spec.trunk, 1);
  params << b, t;
  return params;
}

/// Operator predictions for every (function, query point) pair:
/// rows of `u` are functions, `y` holds the query points; result is
/// functions x query points.
inline Eigen::MatrixXd forward_deeponet_batch(const DeepONetSpec& spec, std::span<const double> params,
                                              const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                                              DeepONetTape* tape = nullptr) {
  spec.validate();
  if (params.size() != spec.parameter_count()) throw ShapeError("DeepONet parameter count mismatch");
  const std::size_t nb = spec.branch.parameter_count();
  const auto bparams = params.subspan(0, nb);
  const auto tparams = params.subspan(nb);
  Eigen::MatrixXd b = forward_dense(spec.branch, bparams, u, tape ? &tape->branch : nullptr);
  Eigen::MatrixXd t = forward_dense(spec.trunk, tparams, Eigen::MatrixXd(y), tape ? &tape->trunk : nullptr);
  Eigen::MatrixXd g = b * t.transpose();
  if (tape) {
    tape->branch_out = std::move(b);
    tape->trunk_out = std::move(t);
  }
  return g;
}

inline double forward_deeponet(const DeepONetSpec& spec, std::span<const double> params,
                               std::span<const double> u_values, double y) {
  if (u_values.size() != spec.branch.input_width()) throw ShapeError("sensor count does not match branch input");
  Eigen::MatrixXd u(1, static_cast<Eigen::Index>(u_values.size()));
  for (std::size_t i = 0; i < u_values.size(); ++i) u(0, static_cast<Eigen::Index>(i)) = u_values[i];
  Eigen::VectorXd yy(1);
  yy(0) = y;
  return forward_deeponet_batch(spec, params, u, yy)(0, 0);
}

inline void backward_deeponet(const DeepONetSpec& spec, std::span<const double> params, const DeepONetTape& tape,
                              const Eigen::MatrixXd& output_grad, std::span<double> grad) {
  if (grad.size() != spec.parameter_count()) throw ShapeError("gradient buffer size mismatch");
  const std::size_t nb = spec.branch.parameter_count();
  const Eigen::MatrixXd d_branch = output_grad * tape.trunk_out;
  const Eigen::MatrixXd d_trunk = output_grad.transpose() * tape.branch_out;
  backward_dense(spec.branch, params.subspan(0, nb), tape.branch, d_branch, grad.subspan(0, nb));
  backward_dense(spec.trunk, params.subspan(nb), tape.trunk, d_trunk, grad.subspan(nb));
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline double mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("MSE shape mismatch");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

inline Eigen::MatrixXd mse_gradient(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  return 2.0 * (pred - target) / static_cast<double>(pred.size());
}

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// MSE of a dense network and its exact gradient with respect to all parameters.
inline LossGradient loss_and_gradient(const DenseNetworkSpec& spec, std::span<const double> params,
                                      const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  DenseTape tape;
  const Eigen::MatrixXd pred = forward_dense(spec, params, inputs, &tape);
  LossGradient out{mse(pred, targets), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()))};
  backward_dense(spec, params, tape, mse_gradient(pred, targets),
                 std::span<double>(out.grad.data(), static_cast<std::size_t>(out.grad.size())));
  return out;
}

/// MSE of a DeepONet over functions x query points, with exact gradient.
inline LossGradient loss_and_gradient(const DeepONetSpec& spec, std::span<const double> params,
                                      const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                                      const Eigen::MatrixXd& targets) {
  DeepONetTape tape;
  const Eigen::MatrixXd pred = forward_deeponet_batch(spec, params, u, y, &tape);
  LossGradient out{mse(pred, targets), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()))};
  backward_deeponet(spec, params, tape, mse_gradient(pred, targets),
                    std::span<double>(out.grad.data(), static_cast<std::size_t>(out.grad.size())));
  return out;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

struct OptimizerParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    if (!(beta1 > 0.0 && beta1 < beta2 && beta2 < 1.0)) throw std::invalid_argument("need 0 < beta1 < beta2 < 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
  }

  friend bool operator==(const OptimizerParams&, const OptimizerParams&) = default;
};

struct ParameterState {
  Eigen::VectorXd params;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::uint64_t step = 0;

  explicit ParameterState(Eigen::VectorXd initial)
      : params(std::move(initial)),
        first_moment(Eigen::VectorXd::Zero(params.size())),
        second_moment(Eigen::VectorXd::Zero(params.size())) {}

  std::span<const double> view() const { return {params.data(), static_cast<std::size_t>(params.size())}; }
};

/// One AdamW update: decoupled decay theta -= lr * lambda * theta, then the
/// bias-corrected Adam step.
inline void adamw_step(ParameterState& state, const Eigen::VectorXd& grads, double lr, const OptimizerParams& opt) {
  if (grads.size() != state.params.size()) throw ShapeError("gradient and parameter sizes differ");
  if (!grads.allFinite()) throw NonFiniteGradientError("non-finite gradient entry, training diverged");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  state.params *= 1.0 - lr * opt.weight_decay;
  state.first_moment = opt.beta1 * state.first_moment + (1.0 - opt.beta1) * grads;
  state.second_moment = opt.beta2 * state.second_moment + (1.0 - opt.beta2) * grads.cwiseProduct(grads);
  state.params.array() -=
      lr * (state.first_moment.array() / bc1) / ((state.second_moment.array() / bc2).sqrt() + opt.epsilon);
}

}  // namespace epochlab::nn
