// Copyright 2026 The Voxage Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VOXAGE_NN_OPTIM_HPP_
#define VOXAGE_NN_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "voxage/nn/autograd.hpp"
#include "voxage/random.hpp"

namespace voxage::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig config)
      : params_(std::move(params)), config_(config) {
    for (Parameter<T>* p : params_) {
      first_.emplace_back(p->value().shape());
      second_.emplace_back(p->value().shape());
    }
  }

  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T lr = static_cast<T>(config_.learning_rate);
    const T eps = static_cast<T>(config_.epsilon);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<T>& value = params_[i]->value();
      const Tensor<T>& grad = params_[i]->grad();
      Tensor<T>& m = first_[i];
      Tensor<T>& v = second_[i];
      for (std::size_t j = 0; j < value.size(); ++j) {
        const T g = grad[j];
        m[j] = b1 * m[j] + (T(1) - b1) * g;
        v[j] = b2 * v[j] + (T(1) - b2) * g * g;
        const T m_hat = m[j] / static_cast<T>(c1);
        const T v_hat = v[j] / static_cast<T>(c2);
        value[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    }
  }

  void zero_grad() {
    for (Parameter<T>* p : params_) p->var.zero_grad();
  }

  const std::vector<Parameter<T>*>& params() const { return params_; }
  std::vector<Tensor<T>>& first_moments() { return first_; }
  std::vector<Tensor<T>>& second_moments() { return second_; }
  const std::vector<Tensor<T>>& first_moments() const { return first_; }
  const std::vector<Tensor<T>>& second_moments() const { return second_; }
  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t steps) { steps_ = steps; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig config_;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
  std::int64_t steps_ = 0;
};

enum class InitKind { kUniformFanIn, kLecunUniform, kNormal, kConstant };

struct InitScheme {
  InitKind kind = InitKind::kUniformFanIn;
  int fan_in = 1;
  double sigma = 0.02;
  double constant = 0.0;

  /// U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)).
  static InitScheme uniform_fan_in(int fan_in) {
    return {InitKind::kUniformFanIn, fan_in, 0.0, 0.0};
  }
  /// U(-1 / sqrt(fan_in), +1 / sqrt(fan_in)).
  static InitScheme lecun_uniform(int fan_in) {
    return {InitKind::kLecunUniform, fan_in, 0.0, 0.0};
  }
  static InitScheme normal(double sigma) { return {InitKind::kNormal, 1, sigma, 0.0}; }
  static InitScheme constant_value(double v) {
    return {InitKind::kConstant, 1, 0.0, v};
  }
};

/// Deterministic for a fixed (shape, scheme, seed) on every platform.
template <typename T>
Tensor<T> seeded_init(const Shape& shape, const InitScheme& scheme,
                      std::uint64_t seed) {
  Tensor<T> out(shape);
  Rng rng(seed);
  switch (scheme.kind) {
    case InitKind::kUniformFanIn:
    case InitKind::kLecunUniform: {
      if (scheme.fan_in <= 0) fail(ErrorCode::kRange, "seeded_init: fan_in must be > 0");
      const double bound = scheme.kind == InitKind::kUniformFanIn
                               ? std::sqrt(6.0 / scheme.fan_in)
                               : 1.0 / std::sqrt(static_cast<double>(scheme.fan_in));
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<T>(rng.uniform(-bound, bound));
      }
      break;
    }
    case InitKind::kNormal:
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<T>(scheme.sigma * rng.normal());
      }
      break;
    case InitKind::kConstant:
      out.fill(static_cast<T>(scheme.constant));
      break;
  }
  return out;
}

/// Stable 64-bit FNV-1a, used to derive per-parameter init seeds from names.
inline std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace voxage::nn

#endif  // VOXAGE_NN_OPTIM_HPP_
