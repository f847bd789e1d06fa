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


// Central finite-difference gradient checking for the double instantiation
// of the nn operators. Shared by the unit tests and the acceptance binary.

#ifndef VOXAGE_TESTS_GRAD_CHECK_HPP_
#define VOXAGE_TESTS_GRAD_CHECK_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "voxage/nn/ops.hpp"
#include "voxage/random.hpp"

namespace voxage::testing {

using nn::Shape;
using nn::Tensor;
using VarD = nn::Var<double>;

inline Tensor<double> random_tensor(Rng& rng, const Shape& shape, double lo = -1.0,
                                    double hi = 1.0) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Values bounded away from zero, for operators with a kink at the origin.
inline Tensor<double> random_away_from_zero(Rng& rng, const Shape& shape,
                                            double margin = 0.05) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(margin, 1.0);
    t[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

struct GradCheckResult {
  double relative_error = 0.0;  // ||analytic - numeric|| / (||analytic|| + ||numeric||)
  bool finite = true;
};

/// `loss` maps the inputs to a scalar. Every input is perturbed element by
/// element with step h.
inline GradCheckResult grad_check(
    const std::function<VarD(const std::vector<VarD>&)>& loss,
    const std::vector<Tensor<double>>& inputs, double h = 1e-5) {
  std::vector<VarD> vars;
  for (const auto& t : inputs) vars.emplace_back(t, true);
  VarD out = loss(vars);
  nn::backward(out);

  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  GradCheckResult result;
  for (std::size_t v = 0; v < inputs.size(); ++v) {
    const Tensor<double> analytic = vars[v].grad();
    for (std::size_t i = 0; i < inputs[v].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<VarD> probe;
        for (std::size_t u = 0; u < inputs.size(); ++u) {
          Tensor<double> t = inputs[u];
          if (u == v) t[i] += delta;
          probe.emplace_back(std::move(t), false);
        }
        return loss(probe).value().item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      const double a = analytic[i];
      if (!std::isfinite(a) || !std::isfinite(numeric)) result.finite = false;
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
  }
  const double denom = std::sqrt(a2) + std::sqrt(n2);
  result.relative_error = denom > 1e-12 ? std::sqrt(diff2) / denom : std::sqrt(diff2);
  return result;
}

/// Reduces a tensor-valued op to a scalar through a fixed random projection,
/// so every output element contributes a distinct weight.
inline VarD project(const VarD& out, std::uint64_t seed) {
  Rng rng(seed);
  VarD weights(random_tensor(rng, out.shape()), false);
  return nn::mean(nn::mul(out, weights));
}

struct OpCase {
  std::string name;
  // Builds inputs for trial `t` and returns the scalar loss closure.
  std::function<std::pair<std::vector<Tensor<double>>,
                          std::function<VarD(const std::vector<VarD>&)>>(Rng&)>
      make;
};

inline int dim(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

/// One case per differentiable operator; each call draws a fresh random shape.
inline std::vector<OpCase> operator_cases() {
  using L = std::function<VarD(const std::vector<VarD>&)>;
  using Ins = std::vector<Tensor<double>>;
  std::vector<OpCase> cases;

  cases.push_back({"conv2d", [](Rng& r) {
    const int n = dim(r, 1, 2), c = dim(r, 1, 3), f = dim(r, 1, 3);
    const int k = dim(r, 1, 3), s = dim(r, 1, 2), p = dim(r, 0, 1);
    const int h = dim(r, k, 6), w = dim(r, k, 6);
    Ins in{random_tensor(r, {n, c, h, w}), random_tensor(r, {f, c, k, k}),
           random_tensor(r, {f})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([s, p, seed](const std::vector<VarD>& v) {
      return project(nn::conv2d(v[0], v[1], v[2], s, p), seed);
    })};
  }});
  cases.push_back({"dense", [](Rng& r) {
    const int n = dim(r, 1, 4), d = dim(r, 1, 5), k = dim(r, 1, 4);
    Ins in{random_tensor(r, {n, d}), random_tensor(r, {d, k}), random_tensor(r, {k})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([seed](const std::vector<VarD>& v) {
      return project(nn::dense(v[0], v[1], v[2]), seed);
    })};
  }});
  cases.push_back({"feature_norm", [](Rng& r) {
    const bool spatial = r.uniform() < 0.5;
    const int n = dim(r, 2, 4), d = dim(r, 1, 4);
    Shape shape = spatial ? Shape{n, d, dim(r, 1, 3), dim(r, 1, 3)} : Shape{n, d};
    Ins in{random_tensor(r, shape, -2.0, 2.0), random_tensor(r, {d}, 0.5, 1.5),
           random_tensor(r, {d})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([seed](const std::vector<VarD>& v) {
      return project(nn::feature_norm(v[0], v[1], v[2], nn::NormStats<double>{}, true),
                     seed);
    })};
  }});
  cases.push_back({"instance_norm", [](Rng& r) {
    const int n = dim(r, 1, 3), c = dim(r, 1, 3);
    Ins in{random_tensor(r, {n, c, dim(r, 2, 4), dim(r, 2, 4)}, -2.0, 2.0),
           random_tensor(r, {c}, 0.5, 1.5), random_tensor(r, {c})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([seed](const std::vector<VarD>& v) {
      return project(nn::instance_norm(v[0], v[1], v[2]), seed);
    })};
  }});
  auto unary_case = [&cases](std::string name, bool kink,
                             std::function<VarD(const VarD&)> op) {
    cases.push_back({name, [kink, op](Rng& r) {
      Shape shape{dim(r, 1, 4), dim(r, 1, 5)};
      Ins in{kink ? random_away_from_zero(r, shape) : random_tensor(r, shape, -2.0, 2.0)};
      const std::uint64_t seed = r.next_u64();
      return std::pair{in, L([op, seed](const std::vector<VarD>& v) {
        return project(op(v[0]), seed);
      })};
    }});
  };
  unary_case("relu", true, [](const VarD& x) { return nn::relu(x); });
  unary_case("leaky_relu", true, [](const VarD& x) { return nn::leaky_relu(x, 0.2); });
  unary_case("tanh", false, [](const VarD& x) { return nn::tanh(x); });
  unary_case("sigmoid", false, [](const VarD& x) { return nn::sigmoid(x); });
  unary_case("softmax", false, [](const VarD& x) { return nn::softmax(x); });
  unary_case("scale", false, [](const VarD& x) { return nn::scale(x, -1.7); });
  unary_case("flatten_reshape", false, [](const VarD& x) {
    return nn::reshape(x, Shape{static_cast<int>(x.value().size())});
  });
  unary_case("signed_sqrt", true, [](const VarD& x) { return nn::signed_sqrt(x); });
  unary_case("l2_normalize", false, [](const VarD& x) { return nn::l2_normalize(x); });

  auto binary_case = [&cases](std::string name, std::function<VarD(const VarD&, const VarD&)> op) {
    cases.push_back({name, [op](Rng& r) {
      Shape shape{dim(r, 1, 4), dim(r, 1, 5)};
      Ins in{random_tensor(r, shape), random_tensor(r, shape)};
      const std::uint64_t seed = r.next_u64();
      return std::pair{in, L([op, seed](const std::vector<VarD>& v) {
        return project(op(v[0], v[1]), seed);
      })};
    }});
  };
  binary_case("add", [](const VarD& a, const VarD& b) { return nn::add(a, b); });
  binary_case("sub", [](const VarD& a, const VarD& b) { return nn::sub(a, b); });
  binary_case("mul", [](const VarD& a, const VarD& b) { return nn::mul(a, b); });

  cases.push_back({"concat_features", [](Rng& r) {
    const int n = dim(r, 1, 4);
    Ins in{random_tensor(r, {n, dim(r, 1, 4)}), random_tensor(r, {n, dim(r, 1, 4)})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([seed](const std::vector<VarD>& v) {
      return project(nn::concat_features(v[0], v[1]), seed);
    })};
  }});
  cases.push_back({"flatten", [](Rng& r) {
    Ins in{random_tensor(r, {dim(r, 1, 2), dim(r, 1, 3), dim(r, 1, 3), dim(r, 1, 3)})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([seed](const std::vector<VarD>& v) {
      return project(nn::flatten(v[0]), seed);
    })};
  }});
  cases.push_back({"upsample2x", [](Rng& r) {
    Ins in{random_tensor(r, {dim(r, 1, 2), dim(r, 1, 3), dim(r, 1, 3), dim(r, 1, 3)})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([seed](const std::vector<VarD>& v) {
      return project(nn::upsample2x(v[0]), seed);
    })};
  }});
  cases.push_back({"group_sum", [](Rng& r) {
    const int k = dim(r, 1, 3);
    Ins in{random_tensor(r, {dim(r, 1, 3), k * dim(r, 1, 4)})};
    const std::uint64_t seed = r.next_u64();
    return std::pair{in, L([k, seed](const std::vector<VarD>& v) {
      return project(nn::group_sum(v[0], k), seed);
    })};
  }});
  cases.push_back({"cross_entropy", [](Rng& r) {
    const int n = dim(r, 1, 4), k = dim(r, 2, 5);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(r.below(k));
    Ins in{random_tensor(r, {n, k}, -3.0, 3.0)};
    return std::pair{in, L([labels](const std::vector<VarD>& v) {
      return nn::cross_entropy(v[0], labels);
    })};
  }});
  cases.push_back({"mse", [](Rng& r) {
    Shape shape{dim(r, 1, 4), dim(r, 1, 5)};
    Ins in{random_tensor(r, shape), random_tensor(r, shape)};
    return std::pair{in, L([](const std::vector<VarD>& v) { return nn::mse(v[0], v[1]); })};
  }});
  cases.push_back({"mse_const", [](Rng& r) {
    Ins in{random_tensor(r, {dim(r, 1, 4), dim(r, 1, 5)})};
    return std::pair{in, L([](const std::vector<VarD>& v) { return nn::mse(v[0], 1.0); })};
  }});
  cases.push_back({"l1", [](Rng& r) {
    Shape shape{dim(r, 1, 4), dim(r, 1, 5)};
    Tensor<double> target = random_tensor(r, shape);
    Tensor<double> pred = random_away_from_zero(r, shape);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += target[i];
    Ins in{pred, target};
    return std::pair{in, L([](const std::vector<VarD>& v) { return nn::l1(v[0], v[1]); })};
  }});
  cases.push_back({"mean", [](Rng& r) {
    Ins in{random_tensor(r, {dim(r, 1, 4), dim(r, 1, 5)})};
    return std::pair{in, L([](const std::vector<VarD>& v) { return nn::mean(v[0]); })};
  }});
  return cases;
}

}  // namespace voxage::testing

#endif  // VOXAGE_TESTS_GRAD_CHECK_HPP_
