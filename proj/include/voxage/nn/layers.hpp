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

#ifndef VOXAGE_NN_LAYERS_HPP_
#define VOXAGE_NN_LAYERS_HPP_

#include <cstdint>
#include <string>

#include "voxage/nn/ops.hpp"
#include "voxage/nn/optim.hpp"

namespace voxage::nn {

using Scalar = float;
using Variable = Var<Scalar>;
using Store = ParameterStore<Scalar>;

/// Parameters are seeded from (model seed, parameter name) so the values do
/// not depend on construction order.
inline Tensor<Scalar> init_param(std::uint64_t seed, const std::string& name,
                                 const Shape& shape, const InitScheme& scheme) {
  return seeded_init<Scalar>(shape, scheme, seed ^ name_hash(name));
}

struct Conv2d {
  Parameter<Scalar>* weight = nullptr;
  Parameter<Scalar>* bias = nullptr;
  int stride = 1;
  int padding = 0;

  static Conv2d create(Store& store, const std::string& name, int in_channels,
                       int out_channels, int kernel, int stride, int padding,
                       bool with_bias, std::uint64_t seed,
                       InitKind init = InitKind::kUniformFanIn) {
    Conv2d c;
    const int fan_in = in_channels * kernel * kernel;
    const InitScheme scheme = init == InitKind::kLecunUniform
                                  ? InitScheme::lecun_uniform(fan_in)
                                  : InitScheme::uniform_fan_in(fan_in);
    c.weight = store.add(name + ".weight",
                         init_param(seed, name + ".weight",
                                    {out_channels, in_channels, kernel, kernel}, scheme));
    if (with_bias) {
      c.bias = store.add(name + ".bias", Tensor<Scalar>(Shape{out_channels}));
    }
    c.stride = stride;
    c.padding = padding;
    return c;
  }

  Variable operator()(const Variable& x) const {
    return bias ? conv2d(x, weight->var, bias->var, stride, padding)
                : conv2d(x, weight->var, stride, padding);
  }
};

struct Dense {
  Parameter<Scalar>* weight = nullptr;
  Parameter<Scalar>* bias = nullptr;

  static Dense create(Store& store, const std::string& name, int in_features,
                      int out_features, bool with_bias, std::uint64_t seed) {
    Dense d;
    d.weight = store.add(name + ".weight",
                         init_param(seed, name + ".weight", {in_features, out_features},
                                    InitScheme::uniform_fan_in(in_features)));
    if (with_bias) {
      d.bias = store.add(name + ".bias", Tensor<Scalar>(Shape{out_features}));
    }
    return d;
  }

  Variable operator()(const Variable& x) const {
    return bias ? dense(x, weight->var, bias->var) : matmul(x, weight->var);
  }
};

/// Batch-statistics feature normalization with running moments kept as
/// non-trainable parameters (so they are checkpointed).
struct FeatureNorm {
  Parameter<Scalar>* gain = nullptr;
  Parameter<Scalar>* shift = nullptr;
  Parameter<Scalar>* running_mean = nullptr;
  Parameter<Scalar>* running_var = nullptr;

  static FeatureNorm create(Store& store, const std::string& name, int features) {
    FeatureNorm n;
    n.gain = store.add(name + ".gain", Tensor<Scalar>(Shape{features}, 1.0f));
    n.shift = store.add(name + ".shift", Tensor<Scalar>(Shape{features}));
    n.running_mean = store.add(name + ".running_mean",
                               Tensor<Scalar>(Shape{features}), false);
    n.running_var = store.add(name + ".running_var",
                              Tensor<Scalar>(Shape{features}, 1.0f), false);
    return n;
  }

  Variable operator()(const Variable& x, bool training) const {
    NormStats<Scalar> stats{&running_mean->value(), &running_var->value(), 0.1f};
    return feature_norm(x, gain->var, shift->var, stats, training);
  }
};

struct InstanceNorm {
  Parameter<Scalar>* gain = nullptr;
  Parameter<Scalar>* shift = nullptr;

  static InstanceNorm create(Store& store, const std::string& name, int channels) {
    InstanceNorm n;
    n.gain = store.add(name + ".gain", Tensor<Scalar>(Shape{channels}, 1.0f));
    n.shift = store.add(name + ".shift", Tensor<Scalar>(Shape{channels}));
    return n;
  }

  Variable operator()(const Variable& x) const {
    return instance_norm(x, gain->var, shift->var);
  }
};

}  // namespace voxage::nn

#endif  // VOXAGE_NN_LAYERS_HPP_
