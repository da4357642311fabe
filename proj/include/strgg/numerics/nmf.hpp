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

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "strgg/numerics/dense.hpp"
#include "strgg/numerics/rng.hpp"

namespace strgg {

struct NmfOptions {
  std::size_t rank = 1;
  std::size_t max_iters = 500;
  /// Stop once the per-iteration drop in reconstruction error is below this.
  double tol = 1e-8;
  std::uint64_t seed = 0;
  /// Optional warm starts. Clamped at zero, then perturbed by seeded
  /// uniform noise in [0, init_noise].
  std::optional<Dense2D> init_w;
  std::optional<Dense2D> init_h;
  double init_noise = 0.01;
};

struct NmfResult {
  Dense2D w;  // rows(V) x rank
  Dense2D h;  // rank x cols(V)
  /// ||V - W H||_F after each iteration.
  std::vector<double> reconstruction_errors;

  double final_error() const {
    return reconstruction_errors.empty() ? 0.0 : reconstruction_errors.back();
  }
};

inline constexpr double kNmfEpsilon = 1e-12;

namespace detail {

inline Dense2D nmf_start(const std::optional<Dense2D>& init, std::size_t r, std::size_t c,
                         double noise, Rng& rng, const char* which) {
  if (!init) {
    // (0, 1]
    Dense2D m(r, c);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = 1.0 - rng.uniform();
    return m;
  }
  if (init->rows() != r || init->cols() != c) {
    throw DimensionError(concat("nmf: ", which, " init ", init->shape(), " expected [", r, "x",
                                c, "]"));
  }
  Dense2D m = *init;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!std::isfinite(m[k])) throw DomainError(concat("nmf: non-finite ", which, " init"));
    m[k] = std::max(m[k], 0.0) + noise * rng.uniform();
  }
  return m;
}

}  // namespace detail

/// Lee-Seung multiplicative updates for min ||V - W H||_F with W, H >= 0.
inline NmfResult nmf(const Dense2D& v, const NmfOptions& opt) {
  if (v.empty()) throw DomainError("nmf: empty target");
  for (double x : v.values()) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw DomainError("nmf: target has negative or non-finite entries");
    }
  }
  if (opt.rank < 1 || opt.rank > std::min(v.rows(), v.cols())) {
    throw DomainError(detail::concat("nmf: rank ", opt.rank, " invalid for ", v.shape()));
  }

  Rng rng(opt.seed);
  NmfResult res;
  res.w = detail::nmf_start(opt.init_w, v.rows(), opt.rank, opt.init_noise, rng, "W");
  res.h = detail::nmf_start(opt.init_h, opt.rank, v.cols(), opt.init_noise, rng, "H");
  Dense2D& w = res.w;
  Dense2D& h = res.h;

  double prev = frobenius(v - matmul(w, h));
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    // H <- H .* (W^T V) ./ (W^T W H + eps)
    const Dense2D wtv = matmul_tn(w, v);
    const Dense2D wtwh = matmul(matmul_tn(w, w), h);
    for (std::size_t k = 0; k < h.size(); ++k) h[k] *= wtv[k] / (wtwh[k] + kNmfEpsilon);
    // W <- W .* (V H^T) ./ (W H H^T + eps)
    const Dense2D vht = matmul_nt(v, h);
    const Dense2D whht = matmul(w, matmul_nt(h, h));
    for (std::size_t k = 0; k < w.size(); ++k) w[k] *= vht[k] / (whht[k] + kNmfEpsilon);

    const double err = frobenius(v - matmul(w, h));
    res.reconstruction_errors.push_back(err);
    if (prev - err < opt.tol) break;
    prev = err;
  }
  return res;
}

}  // namespace strgg
