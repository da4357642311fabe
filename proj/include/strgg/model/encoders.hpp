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

// Input embeddings, the two-dimensional Grid LSTM, the scene-context map and
// neighborhood fusion. Weights are read by name through a Binder:
//
//   embed.w_left [10x8]  embed.w_right [2x10]  embed.w_vis [8x10]
//   <cell>.w0, <cell>.w1   gate weights [(2H + in_d) x 4H], gates i|f|o|g
//   <cell>.b0, <cell>.b1   gate biases  [1 x 4H]
//   <cell>.p0, <cell>.p1   output projections [H x out]
//   context.kernel [3x3]  context.bias [1x1]  context.w_fh [(out + H) x 64]

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "strgg/data/scene.hpp"
#include "strgg/numerics/binder.hpp"
#include "strgg/numerics/optim.hpp"
#include "strgg/numerics/rng.hpp"
#include "strgg/numerics/tape.hpp"

namespace strgg {

inline constexpr std::size_t kEmbedObs = 8;
inline constexpr std::size_t kEmbedSize = 10;

/// Repeats the first row until the matrix has `rows` rows.
inline Dense2D pad_front(const Dense2D& x, std::size_t rows) {
  if (x.rows() > rows) {
    throw DimensionError(detail::concat("pad_front: ", x.shape(), " longer than ", rows));
  }
  if (x.rows() == 0) throw DimensionError("pad_front: empty input");
  Dense2D out(rows, x.cols());
  const std::size_t shift = rows - x.rows();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i < shift ? 0 : i - shift, j);
  return out;
}

namespace detail {
inline void require_finite(const Dense2D& x, const char* what) {
  if (!x.all_finite()) throw DomainError(concat(what, ": non-finite input"));
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Embeddings

/// X_hat = W_left * X * W_right, X front-padded to 8 observed steps.
inline Var embed_trajectory(Binder& p, const Dense2D& x) {
  detail::require_finite(x, "embed_trajectory");
  if (x.cols() != 2) throw DimensionError("embed_trajectory: X must be [obs x 2], got " + x.shape());
  Var xv = p.constant(pad_front(x, kEmbedObs));
  return ad::matmul(ad::matmul(p("embed.w_left"), xv), p("embed.w_right"));
}

/// V_hat = V^T * W_vis.
inline Var embed_vislets(Binder& p, const std::optional<Dense2D>& v) {
  if (!v) throw UsageError("embed_vislets: window has no vislets");
  detail::require_finite(*v, "embed_vislets");
  if (v->cols() != 2) throw DimensionError("embed_vislets: V must be [obs x 2], got " + v->shape());
  return ad::matmul(p.constant(transpose(pad_front(*v, kEmbedObs))), p("embed.w_vis"));
}

/// Row-axis concatenation [X_hat; V_hat]; X_hat alone without vislets.
inline Var fuse_inputs(Var x_hat, std::optional<Var> v_hat) {
  if (!v_hat) return x_hat;
  return ad::concat_rows(x_hat, *v_hat);
}

/// Batched trajectory embedding. Row k of `x_flat` is pedestrian k's
/// [8 x 2] input flattened row-major; the result's row k is that
/// pedestrian's X_hat flattened row-major, [n x 100].
inline Var embed_trajectories(Binder& p, Var x_flat) {
  return ad::matmul(x_flat, ad::kron(ad::transpose(p("embed.w_left")), p("embed.w_right")));
}

/// Batched vislet embedding. Row k of `v_flat` is V_k^T flattened row-major
/// (all yaw angles, then all pitch angles); result row k is V_hat_k
/// flattened, [n x 20].
inline Var embed_vislets_batch(Binder& p, Var v_flat) {
  return ad::matmul(v_flat, ad::kron(p.constant(Dense2D::identity(2)), p("embed.w_vis")));
}

// ---------------------------------------------------------------------------
// Grid LSTM

/// Per-dimension hidden and memory, each [n x H].
struct GridLSTMState {
  std::array<Dense2D, 2> h;
  std::array<Dense2D, 2> m;

  static GridLSTMState zeros(std::size_t n, std::size_t hidden) {
    return {{Dense2D(n, hidden), Dense2D(n, hidden)}, {Dense2D(n, hidden), Dense2D(n, hidden)}};
  }
  static GridLSTMState gaussian(std::size_t n, std::size_t hidden, Rng& rng) {
    GridLSTMState s;
    for (int d = 0; d < 2; ++d) s.h[d] = rng.normal_matrix(n, hidden);
    for (int d = 0; d < 2; ++d) s.m[d] = rng.normal_matrix(n, hidden);
    return s;
  }
  std::size_t rows() const { return h[0].rows(); }

  friend bool operator==(const GridLSTMState&, const GridLSTMState&) = default;
};

struct GridLSTMVars {
  std::array<Var, 2> h;
  std::array<Var, 2> m;

  static GridLSTMVars constant(Tape& t, const GridLSTMState& s) {
    return {{t.constant(s.h[0]), t.constant(s.h[1])}, {t.constant(s.m[0]), t.constant(s.m[1])}};
  }
  GridLSTMState values() const {
    return {{h[0].value(), h[1].value()}, {m[0].value(), m[1].value()}};
  }
};

struct GridLSTMOutput {
  std::array<Var, 2> f;  // per-dimension projected outputs [n x out]
  GridLSTMVars state;
};

/// One step of a two-dimensional Grid LSTM. Both dimensions read the shared
/// hidden vector [h_0, h_1] plus their own input.
inline GridLSTMOutput grid_lstm_step(Binder& p, const std::string& cell,
                                     const std::array<Var, 2>& inputs, const GridLSTMVars& s) {
  for (int d = 0; d < 2; ++d) {
    if (!s.h[d].value().same_shape(s.m[d].value()) ||
        !s.h[d].value().same_shape(s.h[0].value())) {
      throw DimensionError(detail::concat("grid_lstm_step: state dim ", d, " h ", s.h[d].value().shape(),
                                          " m ", s.m[d].value().shape()));
    }
    if (inputs[d].rows() != s.h[0].rows()) {
      throw DimensionError(detail::concat("grid_lstm_step: input ", d, " ", inputs[d].value().shape(),
                                          " vs state ", s.h[0].value().shape()));
    }
  }
  const std::size_t hidden = s.h[0].cols();
  Var shared = ad::concat_cols(s.h[0], s.h[1]);

  GridLSTMOutput out;
  for (int d = 0; d < 2; ++d) {
    const std::string k = std::to_string(d);
    Var w = p(cell + ".w" + k);
    if (w.rows() != 2 * hidden + inputs[d].cols() || w.cols() != 4 * hidden) {
      throw DimensionError(detail::concat("grid_lstm_step: ", cell, ".w", k, " ", w.value().shape(),
                                          " for hidden ", hidden, " and input ",
                                          inputs[d].value().shape()));
    }
    Var z = ad::add_row(ad::matmul(ad::concat_cols(shared, inputs[d]), w), p(cell + ".b" + k));
    Var gi = ad::sigmoid(ad::slice_cols(z, 0, hidden));
    Var gf = ad::sigmoid(ad::slice_cols(z, hidden, hidden));
    Var go = ad::sigmoid(ad::slice_cols(z, 2 * hidden, hidden));
    Var gg = ad::tanh(ad::slice_cols(z, 3 * hidden, hidden));
    out.state.m[d] = ad::add(ad::mul(gf, s.m[d]), ad::mul(gi, gg));
    out.state.h[d] = ad::mul(go, ad::tanh(out.state.m[d]));
    out.f[d] = ad::matmul(out.state.h[d], p(cell + ".p" + k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoders

struct SocialEncoding {
  Var f_s;  // [n x out]
  Var h_s;  // [n x H], dimension-0 hidden after the step
  GridLSTMVars state;
};

/// GLSTM_nu: dimension 0 reads the trajectory embedding, dimension 1 the
/// vislet embedding. The social feature is the sum of the two projections.
inline SocialEncoding encode_social(Binder& p, Var x_hat_flat, Var v_hat_flat,
                                    const GridLSTMVars& h0) {
  GridLSTMOutput o = grid_lstm_step(p, "glstm_nu", {x_hat_flat, v_hat_flat}, h0);
  return {ad::add(o.f[0], o.f[1]), o.state.h[0], o.state};
}

namespace detail {
/// Pools an axis when it is at least as long as the target, otherwise
/// interpolates it up.
inline Dense2D to_grid_matrix(std::size_t out, std::size_t in) {
  return in >= out ? average_pool_matrix(out, in) : linear_resize_matrix(out, in);
}
}  // namespace detail

/// C_map = M .* (pool8(conv3x3(scene)) + b + reshape8(mean_rows([f_S, h_S]) W_fh)).
/// Only rows listed in `present` enter the mean (all rows when empty).
inline Var encode_context(Binder& p, const SceneMap& scene, Var f_s, Var h_s,
                          const Dense2D& mask, const std::vector<bool>& present = {}) {
  if (mask.rows() != kGridSide || mask.cols() != kGridSide) {
    throw DimensionError("encode_context: mask must be 8x8, got " + mask.shape());
  }
  if (scene.height() < 3 || scene.width() < 3) {
    throw DomainError(detail::concat("encode_context: scene ", scene.cells.shape(),
                                     " smaller than the 3x3 kernel"));
  }
  Tape& t = p.tape();
  Var conv = ad::conv2d_same(t.constant(scene.cells), p("context.kernel"));
  Var pooled = ad::matmul(ad::matmul(detail::to_grid_matrix(kGridSide, scene.height()), conv),
                          strgg::transpose(detail::to_grid_matrix(kGridSide, scene.width())));
  // Pooling rows sum to one, so the conv bias can be added after pooling.
  Var bias = ad::matmul(ad::matmul(Dense2D::ones(kGridSide, 1), p("context.bias")),
                        Dense2D::ones(1, kGridSide));

  const std::size_t n = f_s.rows();
  Dense2D weights(1, n);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += present.empty() || present[i];
  for (std::size_t i = 0; i < n; ++i)
    if (present.empty() || present[i]) weights(0, i) = 1.0 / static_cast<double>(count);
  Var summary = ad::matmul(weights, ad::concat_cols(f_s, h_s));
  Var modulation = ad::reshape(ad::matmul(summary, p("context.w_fh")), kGridSide, kGridSide);

  return ad::mul(ad::add(ad::add(pooled, bias), modulation), mask);
}

inline Var encode_context(Binder& p, const SceneMap& scene, Var f_s, Var h_s,
                          const GridMask& mask, const std::vector<bool>& present = {}) {
  return encode_context(p, scene, f_s, h_s, mask.cells(), present);
}

/// GLSTM_O: dimension 0 reads C_map flattened and shared by every row,
/// dimension 1 the vislet embedding.
inline GridLSTMOutput encode_visuospatial(Binder& p, Var c_map, Var v_hat_flat,
                                          const GridLSTMVars& h_o) {
  const std::size_t n = h_o.h[0].rows();
  Var grid = ad::matmul(Dense2D::ones(n, 1), ad::reshape(c_map, 1, c_map.value().size()));
  GridLSTMOutput o = grid_lstm_step(p, "glstm_o", {grid, v_hat_flat}, h_o);
  o.f[0] = ad::add(o.f[0], o.f[1]);
  return o;
}

/// F = f_S * f_O^T, the pairwise [n x n] neighborhood map.
inline Var combine_neighborhood(Var f_s, Var f_o) {
  if (!f_s.value().same_shape(f_o.value())) {
    throw DimensionError("combine_neighborhood: f_S " + f_s.value().shape() + " vs f_O " +
                         f_o.value().shape());
  }
  return ad::matmul(f_s, ad::transpose(f_o));
}

// ---------------------------------------------------------------------------
// Initialization

/// Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
inline Dense2D glorot(Rng& rng, std::size_t rows, std::size_t cols) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return rng.uniform_matrix(rows, cols, -s, s);
}

inline void init_embeddings(ParameterSet& ps, Rng& rng) {
  ps["embed.w_left"] = glorot(rng, kEmbedSize, kEmbedObs);
  ps["embed.w_right"] = glorot(rng, 2, kEmbedSize);
  ps["embed.w_vis"] = glorot(rng, kEmbedObs, kEmbedSize);
}

/// Weights are N(0, 1/in_d), scaled to the input width rather than the
/// full [h0, h1, x] fan-in. Forget-gate biases start at 1.
inline void init_grid_lstm(ParameterSet& ps, const std::string& cell, std::size_t hidden,
                           std::array<std::size_t, 2> in, std::size_t out, Rng& rng) {
  for (int d = 0; d < 2; ++d) {
    const std::string k = std::to_string(d);
    ps[cell + ".w" + k] =
        rng.normal_matrix(2 * hidden + in[d], 4 * hidden, 1.0 / std::sqrt(static_cast<double>(in[d])));
    Dense2D b(1, 4 * hidden);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b(0, j) = 1.0;
    ps[cell + ".b" + k] = b;
    ps[cell + ".p" + k] = glorot(rng, hidden, out);
  }
}

inline void init_context(ParameterSet& ps, std::size_t hidden, std::size_t out, Rng& rng) {
  ps["context.kernel"] = glorot(rng, 3, 3);
  ps["context.bias"] = Dense2D(1, 1);
  ps["context.w_fh"] = glorot(rng, out + hidden, kGridSide * kGridSide);
}

}  // namespace strgg
