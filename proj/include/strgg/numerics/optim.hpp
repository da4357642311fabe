// Copyright 2026 The strgg Authors. All Rights Reserved.
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

#pragma once

#include <cmath>
#include <map>
#include <string>

#include "strgg/numerics/dense.hpp"

namespace strgg {

/// Named parameter blocks, iterated in name order.
using ParameterSet = std::map<std::string, Dense2D>;

/// p <- p - lr * g for every block that has a gradient.
inline void apply_gradients(ParameterSet& params, const ParameterSet& grads, double lr) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw UsageError("apply_gradients: unknown parameter '" + name + "'");
    Dense2D& p = it->second;
    if (!p.same_shape(g)) {
      throw DimensionError(detail::concat("apply_gradients: '", name, "' ", p.shape(),
                                          " vs gradient ", g.shape()));
    }
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

/// Exponential decay applied at epoch boundaries.
struct LearningRateSchedule {
  double base = 5e-3;
  double decay = 0.95;

  double at_epoch(std::size_t epoch) const {
    return base * std::pow(decay, static_cast<double>(epoch));
  }
};

/// Adam with bias correction. Moments are keyed by parameter name.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterSet& params, const ParameterSet& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
      auto it = params.find(name);
      if (it == params.end()) throw UsageError("adam: unknown parameter '" + name + "'");
      Dense2D& p = it->second;
      if (!p.same_shape(g)) {
        throw DimensionError(detail::concat("adam: '", name, "' ", p.shape(), " vs gradient ",
                                            g.shape()));
      }
      Dense2D& m = m_.try_emplace(name, p.rows(), p.cols()).first->second;
      Dense2D& v = v_.try_emplace(name, p.rows(), p.cols()).first->second;
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
        v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
        p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
      }
    }
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  ParameterSet m_, v_;
};

}  // namespace strgg
