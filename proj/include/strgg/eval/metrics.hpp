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

// Displacement metrics. Predictions and ground truth are [n x 2l] blocks,
// one pedestrian per row with (x, y) pairs per step; the mask is [n x l].

#pragma once

#include <cmath>

#include "strgg/numerics/dense.hpp"

namespace strgg {

namespace detail {

inline void check_metric_shapes(const Dense2D& pred, const Dense2D& truth, const Dense2D& mask,
                                const char* what) {
  if (!pred.same_shape(truth) || mask.rows() != pred.rows() || 2 * mask.cols() != pred.cols()) {
    throw DimensionError(concat(what, ": prediction ", pred.shape(), ", truth ", truth.shape(),
                                ", mask ", mask.shape()));
  }
}

inline double step_error(const Dense2D& pred, const Dense2D& truth, std::size_t i, std::size_t s) {
  return std::hypot(pred(i, 2 * s) - truth(i, 2 * s), pred(i, 2 * s + 1) - truth(i, 2 * s + 1));
}

}  // namespace detail

/// Mean Euclidean error over unmasked (pedestrian, step) cells.
inline double ade(const Dense2D& pred, const Dense2D& truth, const Dense2D& mask) {
  detail::check_metric_shapes(pred, truth, mask, "ade");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.rows(); ++i)
    for (std::size_t s = 0; s < mask.cols(); ++s)
      if (mask(i, s) != 0.0) {
        total += detail::step_error(pred, truth, i, s);
        ++count;
      }
  if (count == 0) throw UsageError("ade: every step is masked");
  return total / static_cast<double>(count);
}

/// Mean over pedestrians of the error at each one's last unmasked step.
inline double fde(const Dense2D& pred, const Dense2D& truth, const Dense2D& mask) {
  detail::check_metric_shapes(pred, truth, mask, "fde");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.rows(); ++i)
    for (std::size_t s = mask.cols(); s-- > 0;)
      if (mask(i, s) != 0.0) {
        total += detail::step_error(pred, truth, i, s);
        ++count;
        break;
      }
  if (count == 0) throw UsageError("fde: every step is masked");
  return total / static_cast<double>(count);
}

}  // namespace strgg
