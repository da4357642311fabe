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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "strgg/data/scene.hpp"
#include "strgg/data/trajectory.hpp"
#include "strgg/eval/metrics.hpp"
#include "strgg/model/encoders.hpp"
#include "strgg/model/kernel.hpp"
#include "strgg/model/recommender.hpp"
#include "strgg/numerics/binder.hpp"
#include "strgg/numerics/optim.hpp"
#include "strgg/numerics/rng.hpp"

namespace strgg {

struct ModelConfig {
  VariantId variant = VariantId::ST;
  std::size_t max_peds = kMaxPedestrians;
  std::size_t hidden = 128;
  std::size_t out = 8;
  std::size_t obs = 8;
  std::size_t pred = 12;
  std::size_t dec_hidden = 32;
  DecodeMode decode = DecodeMode::kResidual;
  /// Multiplies the (relative) input coordinates before embedding.
  double input_scale = 0.02;
  /// h_O for a newly seen pedestrian: N(0, 1) when true, zeros otherwise.
  bool gaussian_h_o = true;
  AdjacencyPolicy policy = AdjacencyPolicy::kStrMinError;
  std::size_t nmf_rank = 8;
  std::size_t nmf_max_iters = 500;
  double nmf_tol = 1e-8;

  const VariantSpec& spec() const { return variant_spec(variant); }

  void validate() const {
    if (obs != 4 && obs != 8) throw UsageError(detail::concat("obs=", obs, " not in {4, 8}"));
    if (pred != 8 && pred != 12) throw UsageError(detail::concat("pred=", pred, " not in {8, 12}"));
    if (max_peds < 1 || hidden < 1 || out < 1 || dec_hidden < 1) {
      throw UsageError("model sizes must be positive");
    }
    if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
      throw UsageError("input_scale must be positive");
    }
    if (nmf_rank < 1) throw UsageError("nmf_rank must be >= 1");
  }
};

/// Carried between consecutive windows of one stream.
struct ModelState {
  GridLSTMState social;
  GridLSTMState visuo;
  std::vector<std::int64_t> ped_ids;  // row -> pedestrian, present rows only
  Dense2D adjacency;                  // last A, [n x n]; empty = all ones
  std::uint64_t seed = 0;             // drives h_O draws for new pedestrians

  bool empty() const noexcept { return ped_ids.empty(); }
};

/// A window laid out in fixed-size padded rows.
struct WindowTensors {
  std::size_t n = 0;
  std::size_t pred = 0;
  std::vector<bool> present;
  Dense2D x_flat;     // [n x 16]
  Dense2D v_flat;     // [n x 16]
  Dense2D last;       // [n x 2]
  Dense2D truth;      // [n x 2l]
  Dense2D step_mask;  // [n x l], 1 where ground truth exists
  bool has_vislets = false;
};

struct Model {
  ModelConfig config;
  ParameterSet params;

  /// Only the blocks the variant uses are created.
  static Model create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.config = cfg;
    Rng rng(seed);
    const VariantSpec& v = cfg.spec();
    const std::size_t n = cfg.max_peds, H = cfg.hidden, o = cfg.out;
    auto& ps = m.params;
    init_embeddings(ps, rng);
    if (!v.vislets) ps.erase("embed.w_vis");
    init_grid_lstm(ps, "glstm_nu", H, {kEmbedSize * kEmbedSize, 2 * kEmbedSize}, o, rng);
    if (v.context) {
      init_grid_lstm(ps, "glstm_o", H, {kGridSide * kGridSide, 2 * kEmbedSize}, o, rng);
      init_context(ps, H, o, rng);
    } else {
      ps["context.f_o_embed"] = rng.normal_matrix(n, o);
    }
    if (v.recommender) {
      ps["kernel.w_f"] = glorot(rng, o + 2 * kEmbedSize, n);
      ps["kernel.b_f"] = Dense2D(1, n);
      ps["kernel.w_r"] = glorot(rng, n, n);
      ps["kernel.w_v8"] = glorot(rng, o, o);
      ps["kernel.w_c"] = glorot(rng, o, cfg.dec_hidden);
      ps["policy.w_mcr"] = glorot(rng, n, H);
    } else {
      ps["kernel.w_v"] = glorot(rng, n, n);
      ps["kernel.b_v"] = Dense2D(1, n);
      ps["kernel.w_c"] = glorot(rng, n, cfg.dec_hidden);
    }
    // Zero output weights: an untrained model is the residual baseline.
    ps["kernel.w_o"] = Dense2D(cfg.dec_hidden, 2 * cfg.pred);
    return m;
  }

  /// Same architecture with every parameter zero: the untrained baseline
  /// whose residual prediction is the last observed position.
  Model zeroed() const {
    Model z = *this;
    for (auto& [name, block] : z.params) block = Dense2D(block.rows(), block.cols());
    return z;
  }

  WindowTensors tensors(const TrajectoryWindow& w) const {
    const ModelConfig& c = config;
    if (w.obs != c.obs || w.pred != c.pred) {
      throw UsageError(detail::concat("window obs/pred ", w.obs, "/", w.pred, " but model expects ",
                                      c.obs, "/", c.pred));
    }
    if (w.size() > c.max_peds) {
      throw UsageError(detail::concat("window has ", w.size(), " pedestrians, model max ", c.max_peds));
    }
    WindowTensors t;
    t.n = c.max_peds;
    t.pred = c.pred;
    t.present.assign(t.n, false);
    t.x_flat = Dense2D(t.n, 2 * kEmbedObs);
    t.v_flat = Dense2D(t.n, 2 * kEmbedObs);
    t.last = Dense2D(t.n, 2);
    t.truth = Dense2D(t.n, 2 * c.pred);
    t.step_mask = Dense2D(t.n, c.pred);
    t.has_vislets = w.has_vislets();
    const bool residual = c.decode == DecodeMode::kResidual;
    for (std::size_t k = 0; k < w.size(); ++k) {
      t.present[k] = true;
      const Dense2D& o = w.observed[k];
      t.last(k, 0) = o(o.rows() - 1, 0);
      t.last(k, 1) = o(o.rows() - 1, 1);
      const Dense2D x = pad_front(o, kEmbedObs);
      for (std::size_t s = 0; s < kEmbedObs; ++s)
        for (std::size_t d = 0; d < 2; ++d)
          t.x_flat(k, 2 * s + d) = c.input_scale * (x(s, d) - (residual ? t.last(k, d) : 0.0));
      if (t.has_vislets) {
        const Dense2D v = pad_front((*w.vislets)[k], kEmbedObs);
        for (std::size_t s = 0; s < kEmbedObs; ++s)
          for (std::size_t d = 0; d < 2; ++d) t.v_flat(k, d * kEmbedObs + s) = v(s, d);
      }
      for (std::size_t s = 0; s < c.pred; ++s) {
        if (!w.presence[k][s]) continue;
        t.step_mask(k, s) = 1.0;
        t.truth(k, 2 * s) = w.future[k](s, 0);
        t.truth(k, 2 * s + 1) = w.future[k](s, 1);
      }
    }
    return t;
  }

  /// Re-indexes carried state rows to this window's pedestrians. Unseen
  /// pedestrians start from zero (social) or the h_O draw (visuospatial).
  ModelState align(const ModelState& prev, const TrajectoryWindow& w) const {
    const std::size_t n = config.max_peds, H = config.hidden;
    ModelState s;
    s.seed = prev.seed;
    s.social = GridLSTMState::zeros(n, H);
    s.visuo = GridLSTMState::zeros(n, H);
    s.adjacency = Dense2D::ones(n, n);
    s.ped_ids = w.ped_ids;
    std::map<std::int64_t, std::size_t> old_row;
    for (std::size_t r = 0; r < prev.ped_ids.size(); ++r) old_row[prev.ped_ids[r]] = r;
    std::vector<std::optional<std::size_t>> src(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      auto it = old_row.find(w.ped_ids[k]);
      if (it != old_row.end()) src[k] = it->second;
    }
    auto copy_row = [&](Dense2D& dst, const Dense2D& from, std::size_t k, std::size_t r) {
      for (std::size_t j = 0; j < dst.cols(); ++j) dst(k, j) = from(r, j);
    };
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (src[k]) {
        for (int d = 0; d < 2; ++d) {
          copy_row(s.social.h[d], prev.social.h[d], k, *src[k]);
          copy_row(s.social.m[d], prev.social.m[d], k, *src[k]);
          copy_row(s.visuo.h[d], prev.visuo.h[d], k, *src[k]);
          copy_row(s.visuo.m[d], prev.visuo.m[d], k, *src[k]);
        }
      } else if (config.gaussian_h_o) {
        Rng rng(mix_seed(prev.seed, static_cast<std::uint64_t>(w.ped_ids[k])));
        for (int d = 0; d < 2; ++d)
          for (std::size_t j = 0; j < H; ++j) s.visuo.h[d](k, j) = rng.normal();
      }
    }
    if (!prev.adjacency.empty()) {
      for (std::size_t k = 0; k < w.size(); ++k)
        for (std::size_t q = 0; q < w.size(); ++q)
          if (src[k] && src[q]) s.adjacency(k, q) = prev.adjacency(*src[k], *src[q]);
    }
    return s;
  }
};

/// Keeps rows flagged in `present` and zeroes the rest.
inline Var mask_rows(Var v, const std::vector<bool>& present) {
  Dense2D m(v.rows(), v.cols());
  for (std::size_t i = 0; i < v.rows(); ++i)
    if (present[i])
      for (std::size_t j = 0; j < v.cols(); ++j) m(i, j) = 1.0;
  return ad::mul(v, m);
}

/// Bernoulli(keep) mask scaled by 1/keep, on the tape.
inline Var apply_dropout(Var v, double keep, std::uint64_t seed) {
  if (!(keep > 0.0 && keep <= 1.0)) throw UsageError(detail::concat("dropout keep ", keep, " not in (0, 1]"));
  if (keep == 1.0) return v;
  Rng rng(seed);
  Dense2D m(v.rows(), v.cols());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return ad::mul(v, m);
}

/// Value form: identity outside training.
inline Dense2D apply_dropout(const Dense2D& x, double keep, std::uint64_t seed, bool training = true) {
  if (!(keep > 0.0 && keep <= 1.0)) throw UsageError(detail::concat("dropout keep ", keep, " not in (0, 1]"));
  if (!training || keep == 1.0) return x;
  Tape t;
  return apply_dropout(t.constant(x), keep, seed).value();
}

enum class BandSelection { kBest, kFirst };

struct ForwardOptions {
  bool training = false;
  double dropout_keep = 1.0;
  std::uint64_t dropout_seed = 0;
  std::size_t proposals = 1;  // P, recommender variants only
  std::uint64_t band_seed = 0;
  BandSelection selection = BandSelection::kBest;
  std::size_t workers = 1;
};

struct ForwardResult {
  Var prediction;  // [n x 2l] on the caller's tape
  std::optional<ProposalBand> band;
  std::size_t selected = 0;
  Dense2D adjacency;  // A used for the prediction / hand-off, [n x n]
  ModelState next;
};

namespace detail {

inline Dense2D row_mean_adjacency(const std::vector<bool>& present) {
  const std::size_t n = present.size();
  const double count = static_cast<double>(std::count(present.begin(), present.end(), true));
  Dense2D a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (present[i] && present[j]) a(i, j) = 1.0 / count;
  return a;
}

inline Dense2D identity_adjacency(const std::vector<bool>& present) {
  Dense2D a(present.size(), present.size());
  for (std::size_t i = 0; i < present.size(); ++i) a(i, i) = present[i] ? 1.0 : 0.0;
  return a;
}

inline GridLSTMState carry(const Dense2D& a, const GridLSTMState& s) {
  GridLSTMState out;
  for (int d = 0; d < 2; ++d) {
    out.h[d] = update_states(a, s.h[d]);
    out.m[d] = update_states(a, s.m[d]);
  }
  return out;
}

/// Rows scaled to sum 1; all-zero rows stay zero.
inline Dense2D row_normalized(Dense2D a) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) sum += a(i, j);
    if (sum > 0.0)
      for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) /= sum;
  }
  return a;
}

inline Dense2D normalized_to_unit_max(Dense2D a) {
  const double peak = max_value(a);
  if (peak > 0.0)
    for (double& v : a.values()) v /= peak;
  return a;
}

}  // namespace detail

/// One window through the variant's pipeline. Gradients reach every
/// parameter on the selected path; proposal generation stays off the tape.
inline ForwardResult forward(Tape& tape, const Model& model, const TrajectoryWindow& window,
                             const SceneMap* scene, const ModelState& state,
                             const ForwardOptions& opt) {
  const ModelConfig& cfg = model.config;
  const VariantSpec& spec = cfg.spec();
  require_inputs(cfg.variant, window.has_vislets(), scene != nullptr, "this window");
  const WindowTensors t = model.tensors(window);
  const ModelState s0 = model.align(state, window);
  Binder b(tape, model.params);

  Var x_hat = embed_trajectories(b, tape.constant(t.x_flat));
  Var v_hat = spec.vislets ? embed_vislets_batch(b, tape.constant(t.v_flat))
                           : tape.constant(Dense2D(t.n, 2 * kEmbedSize));
  SocialEncoding se = encode_social(b, x_hat, v_hat, GridLSTMVars::constant(tape, s0.social));
  Var f_s = mask_rows(se.f_s, t.present);
  Var h_s = mask_rows(se.h_s, t.present);
  if (opt.training) f_s = apply_dropout(f_s, opt.dropout_keep, mix_seed(opt.dropout_seed, 0));

  Var c_map = tape.constant(Dense2D::ones(kGridSide, kGridSide));
  Var f_o;
  GridLSTMState visuo_next = s0.visuo;
  if (spec.context) {
    c_map = encode_context(b, *scene, f_s, h_s, GridMask(), t.present);
    GridLSTMOutput vo = encode_visuospatial(b, c_map, v_hat, GridLSTMVars::constant(tape, s0.visuo));
    f_o = mask_rows(vo.f[0], t.present);
    visuo_next = vo.state.values();
  } else {
    f_o = mask_rows(b("context.f_o_embed"), t.present);
  }
  if (opt.training) f_o = apply_dropout(f_o, opt.dropout_keep, mix_seed(opt.dropout_seed, 1));
  Var f = combine_neighborhood(f_s, f_o);

  ForwardResult r;
  if (!spec.recommender) {
    Var j = context_gradient(f, c_map, b("kernel.w_v"), b("kernel.b_v"));
    r.prediction = decode_trajectory(b, j, cfg.pred, t.last, cfg.decode, 1.0 / cfg.input_scale);
    r.adjacency = spec.graph == GraphMode::kFull ? detail::row_mean_adjacency(t.present)
                                                 : detail::identity_adjacency(t.present);
  } else {
    Var f_hat = kernel_features(b, f, f_s, v_hat, c_map);
    Var a = soft_attention(f_hat);
    Var f_o_mixed = weight_context(a, f_o);

    const Dense2D fs_val = f_s.value(), fo_val = f_o_mixed.value();
    const Dense2D& w_v8 = model.params.at("kernel.w_v8");
    ProposalScorer score = [&](const Dense2D& adj) {
      const Dense2D j = interaction_gradient(fs_val + matmul(detail::row_normalized(adj), fs_val), fo_val, w_v8);
      Tape local;
      Binder lb(local, model.params);
      const Dense2D pred = decode_trajectory(lb, local.constant(j), cfg.pred, t.last, cfg.decode, 1.0 / cfg.input_scale).value();
      return std::make_pair(pred, ade(pred, t.truth, t.step_mask));
    };

    Dense2D chosen, carried;
    if (cfg.policy == AdjacencyPolicy::kStrMinError) {
      ProposalInputs in;
      in.attention = a.value();
      in.c_map = c_map.value();
      in.hidden = h_s.value();
      in.prev_adjacency = s0.adjacency;
      in.present = t.present;
      in.rank = cfg.nmf_rank;
      in.max_iters = cfg.nmf_max_iters;
      in.tol = cfg.nmf_tol;
      r.band = generate_band(opt.proposals, in, opt.band_seed, score, opt.workers);
      const Selection best = select_best(*r.band);
      r.selected = opt.selection == BandSelection::kBest ? best.index : 0;
      chosen = r.band->proposals[r.selected].a;
      // Evaluation hands off the first proposal, so the carried state does
      // not depend on P.
      carried = opt.training ? chosen : r.band->proposals[0].a;
    } else {
      PolicyInputs pin;
      pin.positions = t.last;
      pin.hidden = h_s.value();
      pin.w = model.params.at("policy.w_mcr");
      chosen = adjacency_policy(cfg.policy, pin);
      for (std::size_t i = 0; i < t.n; ++i)
        for (std::size_t q = 0; q < t.n; ++q)
          if (!t.present[i] || !t.present[q]) chosen(i, q) = 0.0;
      chosen = detail::normalized_to_unit_max(std::move(chosen));
      carried = chosen;
    }
    // Self-loop plus neighbors: a dense A alone averages every pedestrian's
    // features together and the kernel loses who is who.
    Var f_s_graph = ad::add(f_s, ad::matmul(tape.constant(detail::row_normalized(chosen)), f_s));
    Var j = interaction_gradient(f_s_graph, f_o_mixed, b("kernel.w_v8"));
    r.prediction = decode_trajectory(b, j, cfg.pred, t.last, cfg.decode, 1.0 / cfg.input_scale);
    r.adjacency = carried;
  }

  r.next.seed = s0.seed;
  r.next.ped_ids = window.ped_ids;
  r.next.adjacency = r.adjacency;
  r.next.social = detail::carry(r.adjacency, se.state.values());
  r.next.visuo = spec.context ? detail::carry(r.adjacency, visuo_next) : s0.visuo;
  return r;
}

}  // namespace strgg
