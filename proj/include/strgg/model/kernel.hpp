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

// Prediction kernel: feature map, interaction and context gradients, the
// linear decoder, and the variant table. Named weights:
//
//   kernel.w_f [(out + 20) x n]  kernel.b_f [1 x n]  kernel.w_r [n x n]
//   kernel.w_v [n x n]  kernel.b_v [1 x n]           (context path)
//   kernel.w_v8 [out x out]                          (recommender path)
//   kernel.w_c [in x dec]  kernel.w_o [dec x 2l]     (decoder)

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "strgg/numerics/binder.hpp"
#include "strgg/numerics/tape.hpp"

namespace strgg {

// ---------------------------------------------------------------------------
// Variants

enum class VariantId {
  LSTM_O,
  ST,
  ST_V,
  ST_GGRNN,
  ST_GGRNN_V,
  GGRNN_V,
  STR,
  STR_V,
  STR_GGRNN,
  STR_GGRNN_V,
};

/// How the adjacency handed to the next window is formed.
enum class GraphMode { kIdentity, kFull, kRecommended };

struct VariantSpec {
  VariantId id;
  const char* name;
  bool vislets;      // head-pose cue feeds both Grid LSTMs
  bool context;      // scene map, C_map and GLSTM_O
  bool recommender;  // NMF proposal band and selection
  GraphMode graph;
};

inline constexpr std::array<VariantSpec, 10> kVariants{{
    {VariantId::LSTM_O, "lstm_o", false, false, false, GraphMode::kIdentity},
    {VariantId::ST, "st", false, false, false, GraphMode::kFull},
    {VariantId::ST_V, "st_v", true, false, false, GraphMode::kFull},
    {VariantId::ST_GGRNN, "st_ggrnn", false, true, false, GraphMode::kFull},
    {VariantId::ST_GGRNN_V, "st_ggrnn_v", true, true, false, GraphMode::kFull},
    {VariantId::GGRNN_V, "ggrnn_v", true, true, false, GraphMode::kIdentity},
    {VariantId::STR, "str", false, false, true, GraphMode::kRecommended},
    {VariantId::STR_V, "str_v", true, false, true, GraphMode::kRecommended},
    {VariantId::STR_GGRNN, "str_ggrnn", false, true, true, GraphMode::kRecommended},
    {VariantId::STR_GGRNN_V, "str_ggrnn_v", true, true, true, GraphMode::kRecommended},
}};

inline const VariantSpec& variant_spec(VariantId id) {
  for (const VariantSpec& v : kVariants)
    if (v.id == id) return v;
  throw UsageError("unknown variant id");
}

/// Case-insensitive; '-' and '_' are interchangeable.
inline VariantId parse_variant(const std::string& text) {
  std::string key;
  for (char c : text) key += c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const VariantSpec& v : kVariants)
    if (key == v.name) return v.id;
  std::string names;
  for (const VariantSpec& v : kVariants) names += (names.empty() ? "" : ", ") + std::string(v.name);
  throw UsageError("unknown variant '" + text + "' (expected one of: " + names + ")");
}

inline std::string variant_name(VariantId id) { return variant_spec(id).name; }

/// Inputs a variant needs that the data lacks; empty when runnable.
inline std::vector<std::string> missing_inputs(VariantId id, bool have_vislets, bool have_scene) {
  const VariantSpec& v = variant_spec(id);
  std::vector<std::string> missing;
  if (v.vislets && !have_vislets) missing.push_back("vislets");
  if (v.context && !have_scene) missing.push_back("scene map");
  return missing;
}

inline void require_inputs(VariantId id, bool have_vislets, bool have_scene,
                           const std::string& where = {}) {
  const auto missing = missing_inputs(id, have_vislets, have_scene);
  if (missing.empty()) return;
  std::string list;
  for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
  throw UsageError("variant " + variant_name(id) + " needs " + list +
                   (where.empty() ? "" : " which " + where + " lacks"));
}

// ---------------------------------------------------------------------------
// Kernel operations

/// Elementwise product after resizing `c_map` bilinearly to `like`'s shape.
inline Var modulate(Var like, Var c_map) {
  return ad::mul(like, ad::resize_bilinear(c_map, like.rows(), like.cols()));
}

/// F_hat = resize(C_map) .* (([f_S, V_hat] W_f + b_f) .* (F W_r)).
inline Var kernel_features(Binder& p, Var f, Var f_s, Var v_hat, Var c_map) {
  if (f.rows() != f_s.rows() || v_hat.rows() != f_s.rows()) {
    throw DimensionError(detail::concat("kernel_features: F ", f.value().shape(), ", f_S ",
                                        f_s.value().shape(), ", V_hat ", v_hat.value().shape()));
  }
  Var cue = ad::add_row(ad::matmul(ad::concat_cols(f_s, v_hat), p("kernel.w_f")), p("kernel.b_f"));
  Var mixed = ad::matmul(f, p("kernel.w_r"));
  return modulate(ad::mul(cue, mixed), c_map);
}

/// d/d f_O of sum((f_S W_v) .* f_O), evaluated by the tape on a private
/// graph, then rectified.
inline Dense2D interaction_gradient(const Dense2D& f_s, const Dense2D& f_o, const Dense2D& w_v) {
  Tape inner;
  Var coupling = ad::matmul(inner.constant(f_s), inner.constant(w_v));
  if (!coupling.value().same_shape(f_o)) {
    throw DimensionError("interaction_gradient: f_S W_v " + coupling.value().shape() +
                         " vs f_O " + f_o.shape());
  }
  Var fo = inner.parameter(f_o);
  inner.backward(ad::sum(ad::mul(coupling, fo)));
  return map(inner.grad(fo), [](double g) { return g > 0.0 ? g : 0.0; });
}

/// Differentiable form of interaction_gradient for the training graph. The
/// coupling is linear in f_O, so its gradient is f_S W_v and this is
/// ReLU(f_S W_v); tests pin it against the tape-derived version.
inline Var interaction_gradient(Var f_s, Var f_o, Var w_v) {
  Var coupling = ad::matmul(f_s, w_v);
  if (!coupling.value().same_shape(f_o.value())) {
    throw DimensionError("interaction_gradient: f_S W_v " + coupling.value().shape() +
                         " vs f_O " + f_o.value().shape());
  }
  return ad::relu(coupling);
}

/// J = ReLU((F W_v + b_v) .* resize(C_map)).
inline Var context_gradient(Var f, Var c_map, Var w_v, Var b_v) {
  return ad::relu(modulate(ad::add_row(ad::matmul(f, w_v), b_v), c_map));
}

enum class DecodeMode { kResidual, kAbsolute };

inline DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "residual") return DecodeMode::kResidual;
  if (s == "absolute") return DecodeMode::kAbsolute;
  throw UsageError("decode must be 'residual' or 'absolute', got '" + s + "'");
}

/// X_tilde = W_o applied after W_c, one row per pedestrian holding its
/// [l x 2] prediction flattened row-major. In residual mode each row is an
/// offset added to that pedestrian's last observed position (`last`, [n x 2]).
/// `unit` converts the network's normalized output to meters.
inline Var decode_trajectory(Binder& p, Var j, std::size_t l, const Dense2D& last,
                             DecodeMode mode = DecodeMode::kResidual, double unit = 1.0) {
  if (l != 8 && l != 12) throw UsageError(detail::concat("decode_trajectory: l=", l, " not in {8, 12}"));
  Var w_o = p("kernel.w_o");
  if (w_o.cols() != 2 * l) {
    throw DimensionError(detail::concat("decode_trajectory: kernel.w_o ", w_o.value().shape(),
                                        " cannot emit ", l, " steps"));
  }
  Var out = ad::matmul(ad::matmul(j, p("kernel.w_c")), w_o);
  if (unit != 1.0) out = ad::scale(out, unit);
  if (mode == DecodeMode::kAbsolute) return out;
  if (last.rows() != j.rows() || last.cols() != 2) {
    throw DimensionError("decode_trajectory: last positions " + last.shape());
  }
  Dense2D base(j.rows(), 2 * l);
  for (std::size_t i = 0; i < j.rows(); ++i)
    for (std::size_t t = 0; t < l; ++t) {
      base(i, 2 * t) = last(i, 0);
      base(i, 2 * t + 1) = last(i, 1);
    }
  return ad::add(out, base);
}

/// Row i of a decoded [n x 2l] block as an [l x 2] trajectory.
inline Dense2D trajectory_of(const Dense2D& decoded, std::size_t i) {
  const std::size_t l = decoded.cols() / 2;
  Dense2D x(l, 2);
  for (std::size_t k = 0; k < 2 * l; ++k) x[k] = decoded(i, k);
  return x;
}

}  // namespace strgg
