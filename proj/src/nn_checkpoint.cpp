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

#include "voxage/nn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "voxage/codec.hpp"

namespace voxage::nn {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::kFormat, "checkpoint: truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries) {
  std::vector<std::uint8_t> out = {'V', 'A', 'N', 'N'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const NamedTensor& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (int d : e.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : e.tensor.storage()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.text(4) != "VANN") fail(ErrorCode::kFormat, "checkpoint: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kUnsupported,
         "checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    e.name = in.text(in.u32());
    const std::uint32_t rank = in.u32();
    if (rank > 8) fail(ErrorCode::kFormat, "checkpoint: implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(in.u32());
    std::vector<float> data(shape_size(shape));
    for (float& v : data) v = std::bit_cast<float>(in.u32());
    e.tensor = Tensor<float>(std::move(shape), std::move(data));
    entries.push_back(std::move(e));
  }
  if (!in.done()) fail(ErrorCode::kFormat, "checkpoint: trailing bytes");
  return entries;
}

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& entries) {
  write_file(path, encode_checkpoint(entries));
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

std::vector<NamedTensor> export_parameters(const ParameterStore<float>& store) {
  std::vector<NamedTensor> out;
  for (Parameter<float>* p : store.all()) out.push_back({p->name, p->value()});
  return out;
}

const NamedTensor* find_entry(const std::vector<NamedTensor>& entries,
                              const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void import_parameters(ParameterStore<float>& store,
                       const std::vector<NamedTensor>& entries) {
  for (Parameter<float>* p : store.all()) {
    const NamedTensor* e = find_entry(entries, p->name);
    if (e == nullptr) {
      fail(ErrorCode::kFormat, "checkpoint: missing parameter '" + p->name + "'");
    }
    if (e->tensor.shape() != p->value().shape()) {
      fail(ErrorCode::kDimension, "checkpoint: parameter '" + p->name +
                                      "' has shape " + shape_str(e->tensor.shape()) +
                                      ", model expects " +
                                      shape_str(p->value().shape()));
    }
    p->value() = e->tensor;
  }
}

void export_adam(const Adam<float>& adam, const std::string& prefix,
                 std::vector<NamedTensor>& out) {
  const auto& params = adam.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({prefix + "m/" + params[i]->name, adam.first_moments()[i]});
    out.push_back({prefix + "v/" + params[i]->name, adam.second_moments()[i]});
  }
  out.push_back({prefix + "step",
                 Tensor<float>::scalar(static_cast<float>(adam.steps()))});
}

void import_adam(Adam<float>& adam, const std::string& prefix,
                 const std::vector<NamedTensor>& entries) {
  const auto& params = adam.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedTensor* m = find_entry(entries, prefix + "m/" + params[i]->name);
    const NamedTensor* v = find_entry(entries, prefix + "v/" + params[i]->name);
    if (m == nullptr || v == nullptr) {
      fail(ErrorCode::kFormat, "checkpoint: missing optimizer state for '" +
                                   params[i]->name + "'");
    }
    adam.first_moments()[i] = m->tensor;
    adam.second_moments()[i] = v->tensor;
  }
  const NamedTensor* step = find_entry(entries, prefix + "step");
  if (step == nullptr) fail(ErrorCode::kFormat, "checkpoint: missing optimizer step");
  adam.set_steps(static_cast<std::int64_t>(step->tensor.item()));
}

}  // namespace voxage::nn
