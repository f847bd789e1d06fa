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

#include "voxage/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace voxage::nn {

namespace {

template <typename T>
void require_shape(const Var<T>& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    fail(ErrorCode::kDimension, std::string(op) + ": expected rank " +
                                    std::to_string(rank) + ", got " +
                                    shape_str(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kDimension, std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
  }
}

// Input gradient buffer of parent i, or nullptr if it needs none.
template <typename T>
T* parent_grad(Node<T>& node, std::size_t i) {
  Node<T>& parent = *node.parents[i];
  return parent.requires_grad ? parent.grad_buffer().data() : nullptr;
}

template <typename T>
const Tensor<T>& parent_value(Node<T>& node, std::size_t i) {
  return node.parents[i]->value;
}

struct ConvGeometry {
  int n, c, h, w;    // input
  int f, kh, kw;     // kernel
  int stride, pad;
  int ho, wo;        // output
  int rows() const { return c * kh * kw; }
  int cols() const { return ho * wo; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const int plane = g.cols();
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        T* row = cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          T* out = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(out, out + g.wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            out[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* dx) {
  const int plane = g.cols();
  for (int c = 0; c < g.c; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const T* row =
            cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          if (iy < 0 || iy >= g.h) continue;
          const T* in = row + static_cast<std::size_t>(oy) * g.wo;
          T* dst = dx + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            if (ix >= 0 && ix < g.w) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Var<T> conv2d_impl(const Var<T>& x, const Var<T>& w, const Var<T>* bias,
                   int stride, int padding) {
  require_shape(x, 4, "conv2d input");
  require_shape(w, 4, "conv2d kernel");
  if (stride < 1 || padding < 0) fail(ErrorCode::kRange, "conv2d: bad stride/padding");
  ConvGeometry g{x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3],
                 w.shape()[0], w.shape()[2], w.shape()[3], stride, padding, 0, 0};
  if (w.shape()[1] != g.c) {
    fail(ErrorCode::kDimension, "conv2d: input has " + std::to_string(g.c) +
                                    " channels, kernel expects " +
                                    std::to_string(w.shape()[1]));
  }
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
  if (g.h + 2 * padding < g.kh || g.w + 2 * padding < g.kw) {
    fail(ErrorCode::kDimension, "conv2d: kernel larger than padded input");
  }
  if (bias != nullptr &&
      (bias->value().rank() != 1 || bias->shape()[0] != g.f)) {
    fail(ErrorCode::kDimension, "conv2d: bias must be [F]");
  }

  const std::size_t in_plane = static_cast<std::size_t>(g.c) * g.h * g.w;
  const std::size_t out_plane = static_cast<std::size_t>(g.f) * g.cols();
  const int K = g.rows();
  const int P = g.cols();
  Tensor<T> out(Shape{g.n, g.f, g.ho, g.wo});
  std::vector<T> cols(static_cast<std::size_t>(K) * P);
  const T* wd = w.value().data();
  for (int n = 0; n < g.n; ++n) {
    im2col(x.value().data() + n * in_plane, g, cols.data());
    T* o = out.data() + n * out_plane;
    for (int f = 0; f < g.f; ++f) {
      T* orow = o + static_cast<std::size_t>(f) * P;
      const T b0 = bias ? bias->value()[f] : T(0);
      std::fill(orow, orow + P, b0);
      for (int k = 0; k < K; ++k) {
        const T a = wd[static_cast<std::size_t>(f) * K + k];
        const T* crow = cols.data() + static_cast<std::size_t>(k) * P;
        for (int p = 0; p < P; ++p) orow[p] += a * crow[p];
      }
    }
  }

  auto backward = [g, in_plane, out_plane, K, P](Node<T>& node) {
    const Tensor<T>& xv = parent_value(node, 0);
    const Tensor<T>& wv = parent_value(node, 1);
    T* dx = parent_grad(node, 0);
    T* dw = parent_grad(node, 1);
    T* db = node.parents.size() > 2 ? parent_grad(node, 2) : nullptr;
    const T* gd = node.grad.data();
    std::vector<T> cols(static_cast<std::size_t>(K) * P);
    std::vector<T> dcols(dx ? static_cast<std::size_t>(K) * P : 0);
    for (int n = 0; n < g.n; ++n) {
      const T* go = gd + n * out_plane;
      if (db) {
        for (int f = 0; f < g.f; ++f) {
          const T* grow = go + static_cast<std::size_t>(f) * P;
          T acc = 0;
          for (int p = 0; p < P; ++p) acc += grow[p];
          db[f] += acc;
        }
      }
      if (dw) {
        im2col(xv.data() + n * in_plane, g, cols.data());
        for (int f = 0; f < g.f; ++f) {
          const T* grow = go + static_cast<std::size_t>(f) * P;
          for (int k = 0; k < K; ++k) {
            const T* crow = cols.data() + static_cast<std::size_t>(k) * P;
            T acc = 0;
            for (int p = 0; p < P; ++p) acc += grow[p] * crow[p];
            dw[static_cast<std::size_t>(f) * K + k] += acc;
          }
        }
      }
      if (dx) {
        std::fill(dcols.begin(), dcols.end(), T(0));
        for (int f = 0; f < g.f; ++f) {
          const T* grow = go + static_cast<std::size_t>(f) * P;
          for (int k = 0; k < K; ++k) {
            const T a = wv[static_cast<std::size_t>(f) * K + k];
            T* drow = dcols.data() + static_cast<std::size_t>(k) * P;
            for (int p = 0; p < P; ++p) drow[p] += a * grow[p];
          }
        }
        col2im(dcols.data(), g, dx + n * in_plane);
      }
    }
  };
  if (bias) return make_result<T>(std::move(out), {&x, &w, bias}, backward);
  return make_result<T>(std::move(out), {&x, &w}, backward);
}

template <typename T>
Var<T> dense_impl(const Var<T>& x, const Var<T>& w, const Var<T>* b) {
  require_shape(x, 2, "dense input");
  require_shape(w, 2, "dense weights");
  const int N = x.shape()[0];
  const int D = x.shape()[1];
  const int K = w.shape()[1];
  if (w.shape()[0] != D) {
    fail(ErrorCode::kDimension, "dense: input " + shape_str(x.shape()) +
                                    " incompatible with weights " +
                                    shape_str(w.shape()));
  }
  if (b && (b->value().rank() != 1 || b->shape()[0] != K)) {
    fail(ErrorCode::kDimension, "dense: bias must be [K]");
  }
  Tensor<T> out(Shape{N, K});
  const T* xd = x.value().data();
  const T* wd = w.value().data();
  for (int n = 0; n < N; ++n) {
    T* o = out.data() + static_cast<std::size_t>(n) * K;
    if (b) std::copy_n(b->value().data(), K, o);
    for (int d = 0; d < D; ++d) {
      const T a = xd[static_cast<std::size_t>(n) * D + d];
      const T* wr = wd + static_cast<std::size_t>(d) * K;
      for (int k = 0; k < K; ++k) o[k] += a * wr[k];
    }
  }
  auto backward = [N, D, K](Node<T>& node) {
    const T* xd = parent_value(node, 0).data();
    const T* wd = parent_value(node, 1).data();
    T* dx = parent_grad(node, 0);
    T* dw = parent_grad(node, 1);
    T* db = node.parents.size() > 2 ? parent_grad(node, 2) : nullptr;
    const T* g = node.grad.data();
    for (int n = 0; n < N; ++n) {
      const T* gr = g + static_cast<std::size_t>(n) * K;
      if (db) {
        for (int k = 0; k < K; ++k) db[k] += gr[k];
      }
      for (int d = 0; d < D; ++d) {
        const T* wr = wd + static_cast<std::size_t>(d) * K;
        if (dx) {
          T acc = 0;
          for (int k = 0; k < K; ++k) acc += gr[k] * wr[k];
          dx[static_cast<std::size_t>(n) * D + d] += acc;
        }
        if (dw) {
          const T a = xd[static_cast<std::size_t>(n) * D + d];
          T* dwr = dw + static_cast<std::size_t>(d) * K;
          for (int k = 0; k < K; ++k) dwr[k] += a * gr[k];
        }
      }
    }
  };
  if (b) return make_result<T>(std::move(out), {&x, &w, b}, backward);
  return make_result<T>(std::move(out), {&x, &w}, backward);
}

// Layout shared by the two normalizations: value index
// (outer * features + f) * inner + i.
struct NormLayout {
  int outer, features, inner;
};

NormLayout norm_layout(const Shape& s, const char* op) {
  if (s.size() == 2) return {s[0], s[1], 1};
  if (s.size() == 4) return {s[0], s[1], s[2] * s[3]};
  fail(ErrorCode::kDimension, std::string(op) + ": expected rank 2 or 4, got " +
                                  shape_str(s));
}

template <typename T>
void check_affine(const Var<T>& gain, const Var<T>& shift, int features,
                  const char* op) {
  if (gain.value().size() != static_cast<std::size_t>(features) ||
      shift.value().size() != static_cast<std::size_t>(features)) {
    fail(ErrorCode::kDimension,
         std::string(op) + ": gain/shift must have one entry per feature");
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int padding) {
  return conv2d_impl<T>(x, w, nullptr, stride, padding);
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride,
              int padding) {
  return conv2d_impl<T>(x, w, &bias, stride, padding);
}

template <typename T>
Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  return dense_impl<T>(x, w, &b);
}

template <typename T>
Var<T> matmul(const Var<T>& x, const Var<T>& w) {
  return dense_impl<T>(x, w, nullptr);
}

template <typename T>
Var<T> feature_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& shift,
                    NormStats<T> stats, bool training, T eps) {
  const NormLayout L = norm_layout(x.shape(), "feature_norm");
  check_affine(gain, shift, L.features, "feature_norm");
  const std::size_t m = static_cast<std::size_t>(L.outer) * L.inner;
  if (!training && (stats.mean == nullptr || stats.var == nullptr)) {
    fail(ErrorCode::kState, "feature_norm: inference needs running statistics");
  }
  if (stats.mean && stats.mean->size() != static_cast<std::size_t>(L.features)) {
    fail(ErrorCode::kDimension, "feature_norm: running stats size mismatch");
  }

  auto xhat = std::make_shared<std::vector<T>>(x.value().size());
  auto inv_std = std::make_shared<std::vector<T>>(L.features);
  Tensor<T> out(x.shape());
  const T* xd = x.value().data();
  auto index = [&L](int o, int f, int i) {
    return (static_cast<std::size_t>(o) * L.features + f) * L.inner + i;
  };
  for (int f = 0; f < L.features; ++f) {
    T mu, var;
    if (training) {
      T acc = 0;
      for (int o = 0; o < L.outer; ++o)
        for (int i = 0; i < L.inner; ++i) acc += xd[index(o, f, i)];
      mu = acc / static_cast<T>(m);
      T acc2 = 0;
      for (int o = 0; o < L.outer; ++o)
        for (int i = 0; i < L.inner; ++i) {
          const T d = xd[index(o, f, i)] - mu;
          acc2 += d * d;
        }
      var = acc2 / static_cast<T>(m);
      if (stats.mean) {
        const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
        (*stats.mean)[f] = (T(1) - stats.momentum) * (*stats.mean)[f] + stats.momentum * mu;
        (*stats.var)[f] = (T(1) - stats.momentum) * (*stats.var)[f] + stats.momentum * unbiased;
      }
    } else {
      mu = (*stats.mean)[f];
      var = (*stats.var)[f];
    }
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[f] = is;
    const T gn = gain.value()[f];
    const T sh = shift.value()[f];
    for (int o = 0; o < L.outer; ++o)
      for (int i = 0; i < L.inner; ++i) {
        const std::size_t idx = index(o, f, i);
        const T xh = (xd[idx] - mu) * is;
        (*xhat)[idx] = xh;
        out[idx] = gn * xh + sh;
      }
  }

  auto backward = [L, m, xhat, inv_std, training](Node<T>& node) {
    const T* g = node.grad.data();
    T* dx = parent_grad(node, 0);
    T* dgain = parent_grad(node, 1);
    T* dshift = parent_grad(node, 2);
    const Tensor<T>& gain_v = parent_value(node, 1);
    auto index = [&L](int o, int f, int i) {
      return (static_cast<std::size_t>(o) * L.features + f) * L.inner + i;
    };
    for (int f = 0; f < L.features; ++f) {
      T sum_g = 0, sum_gx = 0;
      for (int o = 0; o < L.outer; ++o)
        for (int i = 0; i < L.inner; ++i) {
          const std::size_t idx = index(o, f, i);
          sum_g += g[idx];
          sum_gx += g[idx] * (*xhat)[idx];
        }
      if (dgain) dgain[f] += sum_gx;
      if (dshift) dshift[f] += sum_g;
      if (!dx) continue;
      const T scale_f = gain_v[f] * (*inv_std)[f];
      const T mean_g = sum_g / static_cast<T>(m);
      const T mean_gx = sum_gx / static_cast<T>(m);
      for (int o = 0; o < L.outer; ++o)
        for (int i = 0; i < L.inner; ++i) {
          const std::size_t idx = index(o, f, i);
          dx[idx] += training
                         ? scale_f * (g[idx] - mean_g - (*xhat)[idx] * mean_gx)
                         : scale_f * g[idx];
        }
    }
  };
  return make_result<T>(std::move(out), {&x, &gain, &shift}, backward);
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& shift,
                     T eps) {
  require_shape(x, 4, "instance_norm");
  const int N = x.shape()[0];
  const int C = x.shape()[1];
  const int HW = x.shape()[2] * x.shape()[3];
  check_affine(gain, shift, C, "instance_norm");

  auto xhat = std::make_shared<std::vector<T>>(x.value().size());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(N) * C);
  Tensor<T> out(x.shape());
  const T* xd = x.value().data();
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
      T acc = 0;
      for (int i = 0; i < HW; ++i) acc += xd[base + i];
      const T mu = acc / static_cast<T>(HW);
      T acc2 = 0;
      for (int i = 0; i < HW; ++i) {
        const T d = xd[base + i] - mu;
        acc2 += d * d;
      }
      const T is = T(1) / std::sqrt(acc2 / static_cast<T>(HW) + eps);
      (*inv_std)[static_cast<std::size_t>(n) * C + c] = is;
      for (int i = 0; i < HW; ++i) {
        const T xh = (xd[base + i] - mu) * is;
        (*xhat)[base + i] = xh;
        out[base + i] = gain.value()[c] * xh + shift.value()[c];
      }
    }
  }
  auto backward = [N, C, HW, xhat, inv_std](Node<T>& node) {
    const T* g = node.grad.data();
    T* dx = parent_grad(node, 0);
    T* dgain = parent_grad(node, 1);
    T* dshift = parent_grad(node, 2);
    const Tensor<T>& gain_v = parent_value(node, 1);
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
        T sum_g = 0, sum_gx = 0;
        for (int i = 0; i < HW; ++i) {
          sum_g += g[base + i];
          sum_gx += g[base + i] * (*xhat)[base + i];
        }
        if (dgain) dgain[c] += sum_gx;
        if (dshift) dshift[c] += sum_g;
        if (!dx) continue;
        const T s = gain_v[c] * (*inv_std)[static_cast<std::size_t>(n) * C + c];
        const T mean_g = sum_g / static_cast<T>(HW);
        const T mean_gx = sum_gx / static_cast<T>(HW);
        for (int i = 0; i < HW; ++i) {
          dx[base + i] += s * (g[base + i] - mean_g - (*xhat)[base + i] * mean_gx);
        }
      }
    }
  };
  return make_result<T>(std::move(out), {&x, &gain, &shift}, backward);
}

namespace {

// Elementwise op whose derivative is expressed through input and output.
template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.shape());
  const T* xd = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  return make_result<T>(std::move(out), {&x}, [deriv](Node<T>& node) {
    T* dx = parent_grad(node, 0);
    if (!dx) return;
    const T* xd = parent_value(node, 0).data();
    for (std::size_t i = 0; i < node.value.size(); ++i) {
      dx[i] += node.grad[i] * deriv(xd[i], node.value[i]);
    }
  });
}

template <typename T>
Var<T> scalar_result(T value, std::initializer_list<const Var<T>*> inputs,
                     std::function<void(Node<T>&)> backward) {
  return make_result<T>(Tensor<T>::scalar(value), inputs, std::move(backward));
}

}  // namespace

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T alpha) {
  return unary<T>(
      x, [alpha](T v) { return v > T(0) ? v : alpha * v; },
      [alpha](T v, T) { return v > T(0) ? T(1) : alpha; });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) fail(ErrorCode::kDimension, "softmax: expected [N,K]");
  const int N = logits.dim(0);
  const int K = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (int n = 0; n < N; ++n) {
    const T* row = logits.data() + static_cast<std::size_t>(n) * K;
    T* o = out.data() + static_cast<std::size_t>(n) * K;
    const T mx = *std::max_element(row, row + K);
    T sum = 0;
    for (int k = 0; k < K; ++k) {
      o[k] = std::exp(row[k] - mx);
      sum += o[k];
    }
    for (int k = 0; k < K; ++k) o[k] /= sum;
  }
  return out;
}

template <typename T>
Var<T> softmax(const Var<T>& x) {
  Tensor<T> out = softmax_rows(x.value());
  const int N = x.shape()[0];
  const int K = x.shape()[1];
  return make_result<T>(std::move(out), {&x}, [N, K](Node<T>& node) {
    T* dx = parent_grad(node, 0);
    if (!dx) return;
    for (int n = 0; n < N; ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * K;
      T dot = 0;
      for (int k = 0; k < K; ++k) dot += node.grad[base + k] * node.value[base + k];
      for (int k = 0; k < K; ++k) {
        dx[base + k] += node.value[base + k] * (node.grad[base + k] - dot);
      }
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {&a, &b}, [](Node<T>& node) {
    for (std::size_t p = 0; p < 2; ++p) {
      T* d = parent_grad(node, p);
      if (!d) continue;
      for (std::size_t i = 0; i < node.grad.size(); ++i) d[i] += node.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {&a, &b}, [](Node<T>& node) {
    T* da = parent_grad(node, 0);
    T* db = parent_grad(node, 1);
    for (std::size_t i = 0; i < node.grad.size(); ++i) {
      if (da) da[i] += node.grad[i];
      if (db) db[i] -= node.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {&a, &b}, [](Node<T>& node) {
    T* da = parent_grad(node, 0);
    T* db = parent_grad(node, 1);
    const Tensor<T>& av = parent_value(node, 0);
    const Tensor<T>& bv = parent_value(node, 1);
    for (std::size_t i = 0; i < node.grad.size(); ++i) {
      if (da) da[i] += node.grad[i] * bv[i];
      if (db) db[i] += node.grad[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  return unary<T>(
      x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> concat_features(const Var<T>& a, const Var<T>& b) {
  require_shape(a, 2, "concat_features");
  require_shape(b, 2, "concat_features");
  const int N = a.shape()[0];
  if (b.shape()[0] != N) {
    fail(ErrorCode::kDimension, "concat_features: batch size mismatch " +
                                    std::to_string(N) + " vs " +
                                    std::to_string(b.shape()[0]));
  }
  const int D1 = a.shape()[1];
  const int D2 = b.shape()[1];
  Tensor<T> out(Shape{N, D1 + D2});
  for (int n = 0; n < N; ++n) {
    std::copy_n(a.value().data() + static_cast<std::size_t>(n) * D1, D1,
                out.data() + static_cast<std::size_t>(n) * (D1 + D2));
    std::copy_n(b.value().data() + static_cast<std::size_t>(n) * D2, D2,
                out.data() + static_cast<std::size_t>(n) * (D1 + D2) + D1);
  }
  return make_result<T>(std::move(out), {&a, &b}, [N, D1, D2](Node<T>& node) {
    T* da = parent_grad(node, 0);
    T* db = parent_grad(node, 1);
    for (int n = 0; n < N; ++n) {
      const T* g = node.grad.data() + static_cast<std::size_t>(n) * (D1 + D2);
      if (da) {
        for (int d = 0; d < D1; ++d) da[static_cast<std::size_t>(n) * D1 + d] += g[d];
      }
      if (db) {
        for (int d = 0; d < D2; ++d) db[static_cast<std::size_t>(n) * D2 + d] += g[D1 + d];
      }
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_size(shape) != x.value().size()) {
    fail(ErrorCode::kDimension, "reshape: " + shape_str(x.shape()) + " -> " +
                                    shape_str(shape));
  }
  return make_result<T>(x.value().reshaped(std::move(shape)), {&x},
                        [](Node<T>& node) {
                          T* dx = parent_grad(node, 0);
                          if (!dx) return;
                          for (std::size_t i = 0; i < node.grad.size(); ++i) {
                            dx[i] += node.grad[i];
                          }
                        });
}

template <typename T>
Var<T> flatten(const Var<T>& x) {
  const int n = x.shape().at(0);
  return reshape<T>(x, Shape{n, static_cast<int>(x.value().size() / n)});
}

template <typename T>
Var<T> upsample2x(const Var<T>& x) {
  require_shape(x, 4, "upsample2x");
  const int N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  Tensor<T> out(Shape{N, C, 2 * H, 2 * W});
  const T* xd = x.value().data();
  for (int p = 0; p < N * C; ++p) {
    for (int y = 0; y < 2 * H; ++y) {
      for (int xx = 0; xx < 2 * W; ++xx) {
        out[(static_cast<std::size_t>(p) * 2 * H + y) * 2 * W + xx] =
            xd[(static_cast<std::size_t>(p) * H + y / 2) * W + xx / 2];
      }
    }
  }
  return make_result<T>(std::move(out), {&x}, [N, C, H, W](Node<T>& node) {
    T* dx = parent_grad(node, 0);
    if (!dx) return;
    for (int p = 0; p < N * C; ++p) {
      for (int y = 0; y < 2 * H; ++y) {
        for (int xx = 0; xx < 2 * W; ++xx) {
          dx[(static_cast<std::size_t>(p) * H + y / 2) * W + xx / 2] +=
              node.grad[(static_cast<std::size_t>(p) * 2 * H + y) * 2 * W + xx];
        }
      }
    }
  });
}

template <typename T>
Var<T> group_sum(const Var<T>& x, int group) {
  require_shape(x, 2, "group_sum");
  const int N = x.shape()[0];
  const int D = x.shape()[1];
  if (group < 1 || D % group != 0) {
    fail(ErrorCode::kDimension, "group_sum: width " + std::to_string(D) +
                                    " not divisible by " + std::to_string(group));
  }
  const int O = D / group;
  Tensor<T> out(Shape{N, O});
  for (int n = 0; n < N; ++n) {
    for (int j = 0; j < O; ++j) {
      T acc = 0;
      for (int r = 0; r < group; ++r) {
        acc += x.value()[static_cast<std::size_t>(n) * D + j * group + r];
      }
      out[static_cast<std::size_t>(n) * O + j] = acc;
    }
  }
  return make_result<T>(std::move(out), {&x}, [N, D, O, group](Node<T>& node) {
    T* dx = parent_grad(node, 0);
    if (!dx) return;
    for (int n = 0; n < N; ++n) {
      for (int j = 0; j < O; ++j) {
        const T g = node.grad[static_cast<std::size_t>(n) * O + j];
        for (int r = 0; r < group; ++r) {
          dx[static_cast<std::size_t>(n) * D + j * group + r] += g;
        }
      }
    }
  });
}

template <typename T>
Var<T> signed_sqrt(const Var<T>& x, T eps) {
  const T root_eps = std::sqrt(eps);
  return unary<T>(
      x,
      [eps, root_eps](T v) {
        const T mag = std::sqrt(std::abs(v) + eps) - root_eps;
        return v < T(0) ? -mag : mag;
      },
      [eps](T v, T) { return T(0.5) / std::sqrt(std::abs(v) + eps); });
}

template <typename T>
Var<T> l2_normalize(const Var<T>& x, T eps) {
  require_shape(x, 2, "l2_normalize");
  const int N = x.shape()[0];
  const int D = x.shape()[1];
  auto norms = std::make_shared<std::vector<T>>(N);
  Tensor<T> out(x.shape());
  for (int n = 0; n < N; ++n) {
    const T* row = x.value().data() + static_cast<std::size_t>(n) * D;
    T ss = 0;
    for (int d = 0; d < D; ++d) ss += row[d] * row[d];
    const T norm = std::sqrt(ss);
    (*norms)[n] = norm;
    T* o = out.data() + static_cast<std::size_t>(n) * D;
    for (int d = 0; d < D; ++d) o[d] = norm > eps ? row[d] / norm : T(0);
  }
  return make_result<T>(std::move(out), {&x}, [N, D, norms, eps](Node<T>& node) {
    T* dx = parent_grad(node, 0);
    if (!dx) return;
    for (int n = 0; n < N; ++n) {
      const T norm = (*norms)[n];
      if (!(norm > eps)) continue;
      const std::size_t base = static_cast<std::size_t>(n) * D;
      T dot = 0;
      for (int d = 0; d < D; ++d) dot += node.value[base + d] * node.grad[base + d];
      for (int d = 0; d < D; ++d) {
        dx[base + d] += (node.grad[base + d] - node.value[base + d] * dot) / norm;
      }
    }
  });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
  require_shape(logits, 2, "cross_entropy");
  const int N = logits.shape()[0];
  const int K = logits.shape()[1];
  if (labels.size() != static_cast<std::size_t>(N)) {
    fail(ErrorCode::kDimension, "cross_entropy: label count mismatch");
  }
  for (int label : labels) {
    if (label < 0 || label >= K) {
      fail(ErrorCode::kRange, "cross_entropy: label " + std::to_string(label) +
                                  " outside [0, " + std::to_string(K) + ")");
    }
  }
  auto probs = std::make_shared<Tensor<T>>(softmax_rows(logits.value()));
  T loss = 0;
  for (int n = 0; n < N; ++n) {
    const T* row = logits.value().data() + static_cast<std::size_t>(n) * K;
    const T mx = *std::max_element(row, row + K);
    T sum = 0;
    for (int k = 0; k < K; ++k) sum += std::exp(row[k] - mx);
    loss += mx + std::log(sum) - row[labels[n]];
  }
  loss /= static_cast<T>(N);
  return scalar_result<T>(loss, {&logits}, [probs, labels, N, K](Node<T>& node) {
    T* dx = parent_grad(node, 0);
    if (!dx) return;
    const T g = node.grad[0] / static_cast<T>(N);
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        const std::size_t i = static_cast<std::size_t>(n) * K + k;
        dx[i] += g * ((*probs)[i] - (k == labels[n] ? T(1) : T(0)));
      }
    }
  });
}

template <typename T>
Var<T> mse(const Var<T>& pred, const Var<T>& target) {
  require_same_shape(pred, target, "mse");
  const std::size_t m = pred.value().size();
  T acc = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const T d = pred.value()[i] - target.value()[i];
    acc += d * d;
  }
  return scalar_result<T>(acc / static_cast<T>(m), {&pred, &target}, [m](Node<T>& node) {
    T* dp = parent_grad(node, 0);
    T* dt = parent_grad(node, 1);
    const Tensor<T>& pv = parent_value(node, 0);
    const Tensor<T>& tv = parent_value(node, 1);
    const T g = T(2) * node.grad[0] / static_cast<T>(m);
    for (std::size_t i = 0; i < m; ++i) {
      const T d = g * (pv[i] - tv[i]);
      if (dp) dp[i] += d;
      if (dt) dt[i] -= d;
    }
  });
}

template <typename T>
Var<T> mse(const Var<T>& pred, T target) {
  const std::size_t m = pred.value().size();
  T acc = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const T d = pred.value()[i] - target;
    acc += d * d;
  }
  return scalar_result<T>(acc / static_cast<T>(m), {&pred}, [m, target](Node<T>& node) {
    T* dp = parent_grad(node, 0);
    if (!dp) return;
    const Tensor<T>& pv = parent_value(node, 0);
    const T g = T(2) * node.grad[0] / static_cast<T>(m);
    for (std::size_t i = 0; i < m; ++i) dp[i] += g * (pv[i] - target);
  });
}

template <typename T>
Var<T> l1(const Var<T>& pred, const Var<T>& target) {
  require_same_shape(pred, target, "l1");
  const std::size_t m = pred.value().size();
  T acc = 0;
  for (std::size_t i = 0; i < m; ++i) acc += std::abs(pred.value()[i] - target.value()[i]);
  return scalar_result<T>(acc / static_cast<T>(m), {&pred, &target}, [m](Node<T>& node) {
    T* dp = parent_grad(node, 0);
    T* dt = parent_grad(node, 1);
    const Tensor<T>& pv = parent_value(node, 0);
    const Tensor<T>& tv = parent_value(node, 1);
    const T g = node.grad[0] / static_cast<T>(m);
    for (std::size_t i = 0; i < m; ++i) {
      const T d = pv[i] - tv[i];
      const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
      if (dp) dp[i] += s;
      if (dt) dt[i] -= s;
    }
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const std::size_t m = x.value().size();
  T acc = 0;
  for (std::size_t i = 0; i < m; ++i) acc += x.value()[i];
  return scalar_result<T>(acc / static_cast<T>(m), {&x}, [m](Node<T>& node) {
    T* dx = parent_grad(node, 0);
    if (!dx) return;
    const T g = node.grad[0] / static_cast<T>(m);
    for (std::size_t i = 0; i < m; ++i) dx[i] += g;
  });
}

#define VOXAGE_INSTANTIATE_OPS(T)                                              \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, int, int);              \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int,     \
                         int);                                                 \
  template Var<T> dense(const Var<T>&, const Var<T>&, const Var<T>&);          \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                        \
  template Var<T> feature_norm(const Var<T>&, const Var<T>&, const Var<T>&,    \
                               NormStats<T>, bool, T);                         \
  template Var<T> instance_norm(const Var<T>&, const Var<T>&, const Var<T>&,   \
                                T);                                            \
  template Var<T> relu(const Var<T>&);                                         \
  template Var<T> leaky_relu(const Var<T>&, T);                                \
  template Var<T> tanh(const Var<T>&);                                         \
  template Var<T> sigmoid(const Var<T>&);                                      \
  template Var<T> softmax(const Var<T>&);                                      \
  template Var<T> add(const Var<T>&, const Var<T>&);                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                           \
  template Var<T> mul(const Var<T>&, const Var<T>&);                           \
  template Var<T> scale(const Var<T>&, T);                                     \
  template Var<T> concat_features(const Var<T>&, const Var<T>&);               \
  template Var<T> reshape(const Var<T>&, Shape);                               \
  template Var<T> flatten(const Var<T>&);                                      \
  template Var<T> upsample2x(const Var<T>&);                                   \
  template Var<T> group_sum(const Var<T>&, int);                               \
  template Var<T> signed_sqrt(const Var<T>&, T);                               \
  template Var<T> l2_normalize(const Var<T>&, T);                              \
  template Var<T> cross_entropy(const Var<T>&, const std::vector<int>&);       \
  template Var<T> mse(const Var<T>&, const Var<T>&);                           \
  template Var<T> mse(const Var<T>&, T);                                       \
  template Var<T> l1(const Var<T>&, const Var<T>&);                            \
  template Var<T> mean(const Var<T>&);                                         \
  template Tensor<T> softmax_rows(const Tensor<T>&);

VOXAGE_INSTANTIATE_OPS(float)
VOXAGE_INSTANTIATE_OPS(double)

#undef VOXAGE_INSTANTIATE_OPS

}  // namespace voxage::nn
