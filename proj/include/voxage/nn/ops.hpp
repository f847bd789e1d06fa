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

// Differentiable operators. Instantiated for float (training) and double
// (gradient checks).

#ifndef VOXAGE_NN_OPS_HPP_
#define VOXAGE_NN_OPS_HPP_

#include <vector>

#include "voxage/nn/autograd.hpp"

namespace voxage::nn {

/// x [N,C,H,W] cross-correlated with w [F,C,kH,kW], zero padding.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int padding);
/// As above plus a per-filter bias [F].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride,
              int padding);

/// x [N,D] * w [D,K] + b [K].
template <typename T>
Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b);
/// x [N,D] * w [D,K], no bias.
template <typename T>
Var<T> matmul(const Var<T>& x, const Var<T>& w);

/// Running statistics kept by feature_norm between batches.
template <typename T>
struct NormStats {
  Tensor<T>* mean = nullptr;
  Tensor<T>* var = nullptr;
  T momentum = T(0.1);
};

/// Per-feature standardization. Features are the columns of a [N,D] input or
/// the channels of a [N,C,H,W] input. In training mode batch moments are used
/// and folded into `stats` (if given); otherwise the running moments are.
template <typename T>
Var<T> feature_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& shift,
                    NormStats<T> stats, bool training, T eps = T(1e-5));

/// Per-sample, per-channel standardization over H and W of [N,C,H,W].
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& shift,
                     T eps = T(1e-5));

template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> leaky_relu(const Var<T>& x, T alpha);
template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
/// Row-wise over the last axis of a [N,K] input.
template <typename T> Var<T> softmax(const Var<T>& x);

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& x, T factor);

/// [N,D1] ++ [N,D2] -> [N,D1+D2].
template <typename T> Var<T> concat_features(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
/// [N,C,H,W] -> [N, C*H*W].
template <typename T> Var<T> flatten(const Var<T>& x);
/// Nearest-neighbour 2x upsampling of [N,C,H,W].
template <typename T> Var<T> upsample2x(const Var<T>& x);

/// [N, o*k] -> [N, o] with out[n,j] = sum_r x[n, j*k + r].
template <typename T> Var<T> group_sum(const Var<T>& x, int group);
/// sign(x) * (sqrt(|x| + eps) - sqrt(eps)); zero stays zero.
template <typename T> Var<T> signed_sqrt(const Var<T>& x, T eps = T(1e-6));
/// Rows scaled to unit L2 norm; rows with norm below eps become zero.
template <typename T> Var<T> l2_normalize(const Var<T>& x, T eps = T(1e-12));

/// Mean cross-entropy of logits [N,K] against class labels.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels);
template <typename T> Var<T> mse(const Var<T>& pred, const Var<T>& target);
/// MSE against a constant target value in every cell.
template <typename T> Var<T> mse(const Var<T>& pred, T target);
template <typename T> Var<T> l1(const Var<T>& pred, const Var<T>& target);
template <typename T> Var<T> mean(const Var<T>& x);

/// Plain (non-differentiable) row-wise softmax.
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& logits);

}  // namespace voxage::nn

#endif  // VOXAGE_NN_OPS_HPP_
