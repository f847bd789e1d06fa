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

// Checkpoint layout (all integers little-endian uint32):
//
//   "VANN" | version | parameter count
//   per parameter: name length | name bytes | rank | dims... | float32 values
//
// Model hyperparameters live in a JSON sidecar (<checkpoint>.json).

#ifndef VOXAGE_NN_CHECKPOINT_HPP_
#define VOXAGE_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxage/nn/autograd.hpp"
#include "voxage/nn/optim.hpp"

namespace voxage::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries);
/// Rejects bad magic, unknown versions and truncated payloads.
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

/// Every parameter (trainable or buffer) under its own name.
std::vector<NamedTensor> export_parameters(const ParameterStore<float>& store);
/// Copies values into same-named parameters; shapes must match and every
/// store parameter must be present.
void import_parameters(ParameterStore<float>& store,
                       const std::vector<NamedTensor>& entries);

/// Optimizer moments and step count, stored as "<prefix>m/<param>",
/// "<prefix>v/<param>" and "<prefix>step".
void export_adam(const Adam<float>& adam, const std::string& prefix,
                 std::vector<NamedTensor>& out);
void import_adam(Adam<float>& adam, const std::string& prefix,
                 const std::vector<NamedTensor>& entries);

const NamedTensor* find_entry(const std::vector<NamedTensor>& entries,
                              const std::string& name);

}  // namespace voxage::nn

#endif  // VOXAGE_NN_CHECKPOINT_HPP_
