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
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "strgg/numerics/errors.hpp"

namespace strgg {

/// Row-major dense matrix of doubles. The carrier for every feature map,
/// weight block and adjacency matrix in the library.
class Dense2D {
 public:
  Dense2D() = default;
  Dense2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Dense2D(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw DimensionError(detail::concat("Dense2D: ", values_.size(),
                                          " values do not fill ", rows_, "x",
                                          cols_));
    }
  }
  Dense2D(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("Dense2D: ragged initializer");
      values_.insert(values_.end(), r.begin(), r.end());
    }
  }

  static Dense2D zeros(std::size_t r, std::size_t c) { return Dense2D(r, c); }
  static Dense2D ones(std::size_t r, std::size_t c) { return Dense2D(r, c, 1.0); }
  static Dense2D identity(std::size_t n) {
    Dense2D m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * cols_, cols_);
  }
  const std::vector<double>& storage() const noexcept { return values_; }

  bool same_shape(const Dense2D& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape() const { return detail::concat("[", rows_, "x", cols_, "]"); }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  /// Same values, new shape; element count must match.
  Dense2D reshaped(std::size_t r, std::size_t c) const {
    if (r * c != values_.size()) {
      throw DimensionError(detail::concat("reshape ", shape(), " to [", r, "x", c, "]"));
    }
    return Dense2D(r, c, values_);
  }

  friend bool operator==(const Dense2D& a, const Dense2D& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Value-level kernels. The differentiable versions in tape.hpp call these.

namespace detail {
inline void require_same(const Dense2D& a, const Dense2D& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(concat(op, ": shape mismatch ", a.shape(), " vs ", b.shape()));
  }
}
}  // namespace detail

inline Dense2D matmul(const Dense2D& a, const Dense2D& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError(detail::concat("matmul: ", a.shape(), " x ", b.shape()));
  }
  Dense2D c(a.rows(), b.cols());
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = &c(i, 0);
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = &b.values()[k * p];
      for (std::size_t j = 0; j < p; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

/// a^T * b without materializing the transpose.
inline Dense2D matmul_tn(const Dense2D& a, const Dense2D& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError(detail::concat("matmul_tn: ", a.shape(), "^T x ", b.shape()));
  }
  Dense2D c(a.cols(), b.cols());
  const std::size_t n = a.cols(), m = a.rows(), p = b.cols();
  for (std::size_t k = 0; k < m; ++k) {
    const double* bk = &b.values()[k * p];
    for (std::size_t i = 0; i < n; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* ci = &c(i, 0);
      for (std::size_t j = 0; j < p; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

/// a * b^T without materializing the transpose.
inline Dense2D matmul_nt(const Dense2D& a, const Dense2D& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError(detail::concat("matmul_nt: ", a.shape(), " x ", b.shape(), "^T"));
  }
  Dense2D c(a.rows(), b.rows());
  const std::size_t m = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = &a.values()[i * m];
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = &b.values()[j * m];
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline Dense2D transpose(const Dense2D& a) {
  Dense2D t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename F>
Dense2D map(const Dense2D& a, F&& f) {
  Dense2D out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k]);
  return out;
}

template <typename F>
Dense2D zip(const Dense2D& a, const Dense2D& b, const char* op, F&& f) {
  detail::require_same(a, b, op);
  Dense2D out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k], b[k]);
  return out;
}

inline Dense2D operator+(const Dense2D& a, const Dense2D& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
inline Dense2D operator-(const Dense2D& a, const Dense2D& b) {
  return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}
inline Dense2D hadamard(const Dense2D& a, const Dense2D& b) {
  return zip(a, b, "multiply", [](double x, double y) { return x * y; });
}
inline Dense2D operator*(double s, const Dense2D& a) {
  return map(a, [s](double x) { return s * x; });
}

inline double sum(const Dense2D& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

inline double max_value(const Dense2D& a) {
  if (a.empty()) throw DomainError("max_value: empty matrix");
  return *std::max_element(a.values().begin(), a.values().end());
}

inline double frobenius(const Dense2D& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

inline double max_abs_diff(const Dense2D& a, const Dense2D& b) {
  detail::require_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline Dense2D concat_rows(const Dense2D& a, const Dense2D& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError(detail::concat("concat_rows: ", a.shape(), " and ", b.shape()));
  }
  std::vector<double> v(a.storage());
  v.insert(v.end(), b.storage().begin(), b.storage().end());
  return Dense2D(a.rows() + b.rows(), a.cols(), std::move(v));
}

inline Dense2D concat_cols(const Dense2D& a, const Dense2D& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError(detail::concat("concat_cols: ", a.shape(), " and ", b.shape()));
  }
  Dense2D out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), &out(i, 0));
    std::copy(b.row(i).begin(), b.row(i).end(), &out(i, a.cols()));
  }
  return out;
}

inline Dense2D slice_cols(const Dense2D& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw DimensionError(detail::concat("slice_cols: [", begin, ",", begin + count,
                                        ") out of ", a.shape()));
  }
  Dense2D out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i)
    std::copy_n(a.row(i).begin() + static_cast<std::ptrdiff_t>(begin), count, &out(i, 0));
  return out;
}

/// Kronecker product: block (i, j) of the result is a(i, j) * b.
inline Dense2D kron(const Dense2D& a, const Dense2D& b) {
  Dense2D out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t s = 0; s < b.cols(); ++s)
          out(i * b.rows() + r, j * b.cols() + s) = a(i, j) * b(r, s);
  return out;
}

/// Row-interpolation matrix for a linear (align-corners) resize from `in` to
/// `out` samples: resized = R * x.
inline Dense2D linear_resize_matrix(std::size_t out, std::size_t in) {
  if (out == 0 || in == 0) throw DimensionError("resize: empty axis");
  Dense2D r(out, in);
  for (std::size_t i = 0; i < out; ++i) {
    const double src = out == 1 ? 0.0
                                : static_cast<double>(i) * static_cast<double>(in - 1) /
                                      static_cast<double>(out - 1);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    const double t = src - static_cast<double>(lo);
    r(i, lo) += 1.0 - t;
    if (hi != lo) r(i, hi) += t;
  }
  return r;
}

/// Adaptive average pooling matrix: bin i averages inputs
/// [floor(i*in/out), ceil((i+1)*in/out)).
inline Dense2D average_pool_matrix(std::size_t out, std::size_t in) {
  if (out == 0 || in < out) {
    throw DimensionError(detail::concat("average pool: cannot pool ", in, " to ", out));
  }
  Dense2D p(out, in);
  for (std::size_t i = 0; i < out; ++i) {
    const std::size_t lo = i * in / out;
    const std::size_t hi = ((i + 1) * in + out - 1) / out;
    for (std::size_t k = lo; k < hi; ++k) p(i, k) = 1.0 / static_cast<double>(hi - lo);
  }
  return p;
}

/// Bilinear resize, separable: R_rows * a * R_cols^T.
inline Dense2D resize_bilinear(const Dense2D& a, std::size_t rows, std::size_t cols) {
  return matmul_nt(matmul(linear_resize_matrix(rows, a.rows()), a),
                   linear_resize_matrix(cols, a.cols()));
}

/// Stride-1 "same" 2-D cross-correlation with zero padding, odd square kernel.
inline Dense2D conv2d_same(const Dense2D& input, const Dense2D& kernel) {
  if (kernel.rows() != kernel.cols() || kernel.rows() % 2 == 0) {
    throw DimensionError(detail::concat("conv2d: kernel must be odd square, got ", kernel.shape()));
  }
  const auto half = static_cast<std::ptrdiff_t>(kernel.rows() / 2);
  const auto h = static_cast<std::ptrdiff_t>(input.rows());
  const auto w = static_cast<std::ptrdiff_t>(input.cols());
  Dense2D out(input.rows(), input.cols());
  for (std::ptrdiff_t i = 0; i < h; ++i)
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      double s = 0.0;
      for (std::ptrdiff_t u = -half; u <= half; ++u)
        for (std::ptrdiff_t v = -half; v <= half; ++v) {
          const std::ptrdiff_t y = i + u, x = j + v;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          s += input(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) *
               kernel(static_cast<std::size_t>(u + half), static_cast<std::size_t>(v + half));
        }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  return out;
}

}  // namespace strgg
