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

#include <gtest/gtest.h>

#include "strgg/data/synthetic.hpp"
#include "strgg/model/model.hpp"
#include "support/gradcheck.hpp"

namespace strgg {
namespace {

using testing::away_from_zero;
using testing::grad_check;
using testing::grad_check_params;

constexpr std::size_t kN = 20;

ParameterSet kernel_params(Rng& rng, std::size_t n, std::size_t out, std::size_t l) {
  ParameterSet ps;
  ps["kernel.w_f"] = rng.uniform_matrix(out + 2 * kEmbedSize, n, -0.5, 0.5);
  ps["kernel.b_f"] = rng.uniform_matrix(1, n, -0.5, 0.5);
  ps["kernel.w_r"] = rng.uniform_matrix(n, n, -0.5, 0.5);
  ps["kernel.w_v"] = rng.uniform_matrix(n, n, -0.5, 0.5);
  ps["kernel.b_v"] = rng.uniform_matrix(1, n, -0.5, 0.5);
  ps["kernel.w_c"] = rng.uniform_matrix(n, 4, -0.5, 0.5);
  ps["kernel.w_o"] = rng.uniform_matrix(4, 2 * l, -0.5, 0.5);
  return ps;
}

TEST(KernelFeatures, ZeroContextMapGivesZero) {
  Rng rng(1);
  ParameterSet ps = kernel_params(rng, kN, 8, 12);
  Tape t;
  Binder b(t, ps);
  Var f = t.constant(rng.uniform_matrix(kN, kN, -1, 1));
  Var fs = t.constant(rng.uniform_matrix(kN, 8, -1, 1));
  Var v = t.constant(rng.uniform_matrix(kN, 20, -1, 1));
  const Dense2D out = kernel_features(b, f, fs, v, t.constant(Dense2D(8, 8))).value();
  EXPECT_EQ(max_abs_diff(out, Dense2D(kN, kN)), 0.0);
}

TEST(KernelFeatures, ZeroMixingWeightsGiveZero) {
  Rng rng(2);
  ParameterSet ps = kernel_params(rng, kN, 8, 12);
  ps["kernel.w_r"] = Dense2D(kN, kN);
  Tape t;
  Binder b(t, ps);
  const Dense2D out = kernel_features(b, t.constant(rng.uniform_matrix(kN, kN, -1, 1)),
                                      t.constant(rng.uniform_matrix(kN, 8, -1, 1)),
                                      t.constant(rng.uniform_matrix(kN, 20, -1, 1)),
                                      t.constant(rng.uniform_matrix(8, 8, 0, 1)))
                          .value();
  EXPECT_EQ(max_abs_diff(out, Dense2D(kN, kN)), 0.0);
}

TEST(KernelFeatures, FiniteAndMatchesDirectFormula) {
  Rng rng(3);
  ParameterSet ps = kernel_params(rng, kN, 8, 12);
  const Dense2D f = rng.uniform_matrix(kN, kN, -1, 1), fs = rng.uniform_matrix(kN, 8, -1, 1),
                v = rng.uniform_matrix(kN, 20, -1, 1), c = rng.uniform_matrix(8, 8, 0, 1);
  Tape t;
  Binder b(t, ps);
  const Dense2D got = kernel_features(b, t.constant(f), t.constant(fs), t.constant(v), t.constant(c)).value();
  const Dense2D cue = concat_cols(fs, v);
  const Dense2D cr = resize_bilinear(c, kN, kN);
  for (std::size_t i = 0; i < kN; ++i)
    for (std::size_t j = 0; j < kN; ++j) {
      double a = ps["kernel.b_f"](0, j), m = 0.0;
      for (std::size_t k = 0; k < cue.cols(); ++k) a += cue(i, k) * ps["kernel.w_f"](k, j);
      for (std::size_t k = 0; k < kN; ++k) m += f(i, k) * ps["kernel.w_r"](k, j);
      ASSERT_TRUE(std::isfinite(got(i, j)));
      EXPECT_NEAR(got(i, j), cr(i, j) * a * m, 1e-12);
    }
}

TEST(KernelFeatures, DimensionMismatch) {
  Rng rng(4);
  ParameterSet ps = kernel_params(rng, kN, 8, 12);
  Tape t;
  Binder b(t, ps);
  EXPECT_THROW(kernel_features(b, t.constant(Dense2D(kN, kN)), t.constant(Dense2D(kN - 1, 8)),
                               t.constant(Dense2D(kN, 20)), t.constant(Dense2D(8, 8))),
               DimensionError);
}

TEST(InteractionGradient, ZeroSocialFeaturesGiveZero) {
  Rng rng(5);
  const Dense2D j = interaction_gradient(Dense2D(kN, 8), rng.uniform_matrix(kN, 8, -1, 1),
                                         rng.uniform_matrix(8, 8, -1, 1));
  EXPECT_EQ(max_abs_diff(j, Dense2D(kN, 8)), 0.0);
}

TEST(InteractionGradient, RectifiesEntries) {
  // f_S W_v = [-3, 2] with W_v = I.
  const Dense2D fs{{-3.0, 2.0}};
  const Dense2D j = interaction_gradient(fs, Dense2D(1, 2), Dense2D::identity(2));
  EXPECT_EQ(j(0, 0), 0.0);
  EXPECT_EQ(j(0, 1), 2.0);
}

TEST(InteractionGradient, TapeGradientEqualsCouplingBeforeRectification) {
  Rng rng(6);
  const Dense2D fs = rng.uniform_matrix(kN, 8, -1, 1), fo = rng.uniform_matrix(kN, 8, -1, 1),
                w = rng.uniform_matrix(8, 8, -1, 1);
  Tape inner;
  Var fo_v = inner.parameter(fo);
  inner.backward(ad::sum(ad::mul(ad::matmul(inner.constant(fs), inner.constant(w)), fo_v)));
  EXPECT_LE(max_abs_diff(inner.grad(fo_v), matmul(fs, w)), 1e-12);

  // The tape-derived value path and the training-graph path agree.
  Tape t;
  const Dense2D closed = interaction_gradient(t.constant(fs), t.constant(fo), t.constant(w)).value();
  EXPECT_LE(max_abs_diff(interaction_gradient(fs, fo, w), closed), 1e-12);
  for (double v : closed.values()) EXPECT_GE(v, 0.0);
}

TEST(InteractionGradient, ShapeMismatch) {
  EXPECT_THROW(interaction_gradient(Dense2D(4, 8), Dense2D(4, 6), Dense2D(8, 8)), DimensionError);
  Tape t;
  EXPECT_THROW(interaction_gradient(t.constant(Dense2D(4, 8)), t.constant(Dense2D(4, 6)),
                                    t.constant(Dense2D(8, 8))),
               DimensionError);
}

TEST(ContextGradient, ZeroContextMapGivesZero) {
  Rng rng(7);
  Tape t;
  const Dense2D j = context_gradient(t.constant(rng.uniform_matrix(kN, kN, -1, 1)), t.constant(Dense2D(8, 8)),
                                     t.constant(rng.uniform_matrix(kN, kN, -1, 1)),
                                     t.constant(rng.uniform_matrix(1, kN, -1, 1)))
                        .value();
  EXPECT_EQ(max_abs_diff(j, Dense2D(kN, kN)), 0.0);
}

TEST(ContextGradient, UniformMapPassesBias) {
  Rng rng(8);
  const double c = 0.37;
  Tape t;
  const Dense2D j = context_gradient(t.constant(rng.uniform_matrix(kN, kN, -1, 1)),
                                     t.constant(Dense2D(8, 8, c)), t.constant(Dense2D(kN, kN)),
                                     t.constant(Dense2D::ones(1, kN)))
                        .value();
  for (double v : j.values()) EXPECT_NEAR(v, c, 1e-15);
}

TEST(ContextGradient, MatchesDirectFormula) {
  Rng rng(9);
  for (int rep = 0; rep < 5; ++rep) {
    const Dense2D f = rng.uniform_matrix(kN, kN, -1, 1), w = rng.uniform_matrix(kN, kN, -1, 1),
                  bv = rng.uniform_matrix(1, kN, -1, 1), c = rng.uniform_matrix(8, 8, 0, 1);
    Tape t;
    const Dense2D got = context_gradient(t.constant(f), t.constant(c), t.constant(w), t.constant(bv)).value();
    const Dense2D cr = resize_bilinear(c, kN, kN);
    for (std::size_t i = 0; i < kN; ++i)
      for (std::size_t q = 0; q < kN; ++q) {
        double s = bv(0, q);
        for (std::size_t k = 0; k < kN; ++k) s += f(i, k) * w(k, q);
        EXPECT_NEAR(got(i, q), std::max(0.0, s * cr(i, q)), 1e-12);
      }
  }
}

TEST(ContextGradient, DimensionMismatch) {
  Tape t;
  EXPECT_THROW(context_gradient(t.constant(Dense2D(4, 4)), t.constant(Dense2D(8, 8)),
                                t.constant(Dense2D(5, 4)), t.constant(Dense2D(1, 4))),
               DimensionError);
}

TEST(Decoder, ZeroInputRepeatsLastPosition) {
  Rng rng(10);
  ParameterSet ps = kernel_params(rng, kN, 8, 12);
  const Dense2D last = rng.uniform_matrix(kN, 2, -5, 5);
  Tape t;
  Binder b(t, ps);
  const Dense2D x = decode_trajectory(b, t.constant(Dense2D(kN, kN)), 12, last).value();
  ASSERT_EQ(x.rows(), kN);
  ASSERT_EQ(x.cols(), 24u);
  for (std::size_t i = 0; i < kN; ++i) {
    const Dense2D traj = trajectory_of(x, i);
    ASSERT_EQ(traj.rows(), 12u);
    for (std::size_t s = 0; s < 12; ++s) {
      EXPECT_EQ(traj(s, 0), last(i, 0));
      EXPECT_EQ(traj(s, 1), last(i, 1));
    }
  }
}

TEST(Decoder, ZeroOutputWeightsRepeatLastPosition) {
  Rng rng(11);
  ParameterSet ps = kernel_params(rng, kN, 8, 8);
  ps["kernel.w_o"] = Dense2D(4, 16);
  const Dense2D last = rng.uniform_matrix(kN, 2, -5, 5);
  Tape t;
  Binder b(t, ps);
  const Dense2D x = decode_trajectory(b, t.constant(rng.uniform_matrix(kN, kN, 0, 1)), 8, last).value();
  for (std::size_t i = 0; i < kN; ++i)
    for (std::size_t s = 0; s < 8; ++s) {
      EXPECT_EQ(x(i, 2 * s), last(i, 0));
      EXPECT_EQ(x(i, 2 * s + 1), last(i, 1));
    }
}

TEST(Decoder, RejectsBadHorizonAndShapes) {
  Rng rng(12);
  ParameterSet ps = kernel_params(rng, kN, 8, 12);
  Tape t;
  Binder b(t, ps);
  Var j = t.constant(Dense2D(kN, kN));
  EXPECT_THROW(decode_trajectory(b, j, 10, Dense2D(kN, 2)), UsageError);
  EXPECT_THROW(decode_trajectory(b, j, 8, Dense2D(kN, 2)), DimensionError);  // w_o emits 12
  EXPECT_THROW(decode_trajectory(b, j, 12, Dense2D(kN, 3)), DimensionError);
  EXPECT_THROW(parse_decode_mode("relative"), UsageError);
}

TEST(KernelGradients, FiniteDifferences) {
  Rng rng(13);
  const std::size_t n = 4, out = 3, l = 8;
  ParameterSet ps;
  ps["kernel.w_f"] = rng.uniform_matrix(out + 2, n, -0.5, 0.5);
  ps["kernel.b_f"] = rng.uniform_matrix(1, n, -0.5, 0.5);
  ps["kernel.w_r"] = rng.uniform_matrix(n, n, -0.5, 0.5);
  ps["kernel.w_v"] = rng.uniform_matrix(n, n, -0.5, 0.5);
  ps["kernel.b_v"] = rng.uniform_matrix(1, n, 0.3, 0.6);
  ps["kernel.w_c"] = rng.uniform_matrix(n, 3, -0.5, 0.5);
  ps["kernel.w_o"] = rng.uniform_matrix(3, 2 * l, -0.5, 0.5);
  const Dense2D f = rng.uniform_matrix(n, n, -1, 1), fs = rng.uniform_matrix(n, out, -1, 1),
                v = rng.uniform_matrix(n, 2, -1, 1), c = rng.uniform_matrix(8, 8, 0.2, 1),
                last = rng.uniform_matrix(n, 2, -1, 1);
  auto r = grad_check_params(
      [&](Binder& b) {
        Tape& t = b.tape();
        Var fh = kernel_features(b, t.constant(f), t.constant(fs), t.constant(v), t.constant(c));
        Var j = context_gradient(ad::add(fh, t.constant(f)), t.constant(c), b("kernel.w_v"), b("kernel.b_v"));
        return decode_trajectory(b, j, l, last);
      },
      ps);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;

  // Interaction path through both of its inputs.
  auto g = grad_check(
      [](Tape&, const std::vector<Var>& in) { return interaction_gradient(in[0], in[1], in[2]); },
      {away_from_zero(rng, 3, 3), rng.uniform_matrix(3, 3, -1, 1), Dense2D::identity(3)});
  EXPECT_LT(g.max_rel_error, 1e-3) << g.worst;
}

// Pipeline configuration per variant, as each baseline is described:
// positions only; full social graph; vislets; scene context; the identity
// graph of the visuospatial-only model; and the recommender family.
TEST(Variants, ConfigurationTable) {
  struct Row {
    const char* name;
    bool vislets, context, recommender;
    GraphMode graph;
  };
  const Row rows[] = {
      {"lstm_o", false, false, false, GraphMode::kIdentity},
      {"st", false, false, false, GraphMode::kFull},
      {"st_v", true, false, false, GraphMode::kFull},
      {"st_ggrnn", false, true, false, GraphMode::kFull},
      {"st_ggrnn_v", true, true, false, GraphMode::kFull},
      {"ggrnn_v", true, true, false, GraphMode::kIdentity},
      {"str", false, false, true, GraphMode::kRecommended},
      {"str_v", true, false, true, GraphMode::kRecommended},
      {"str_ggrnn", false, true, true, GraphMode::kRecommended},
      {"str_ggrnn_v", true, true, true, GraphMode::kRecommended},
  };
  ASSERT_EQ(std::size(rows), kVariants.size());
  for (const Row& r : rows) {
    const VariantSpec& v = variant_spec(parse_variant(r.name));
    EXPECT_STREQ(v.name, r.name);
    EXPECT_EQ(v.vislets, r.vislets) << r.name;
    EXPECT_EQ(v.context, r.context) << r.name;
    EXPECT_EQ(v.recommender, r.recommender) << r.name;
    EXPECT_EQ(v.graph, r.graph) << r.name;
    EXPECT_EQ(v.recommender, v.graph == GraphMode::kRecommended) << r.name;
  }
  EXPECT_EQ(parse_variant("STR-GGRNN-V"), VariantId::STR_GGRNN_V);
  EXPECT_THROW(parse_variant("gan"), UsageError);
}

TEST(Variants, MissingInputsAreListed) {
  EXPECT_TRUE(missing_inputs(VariantId::LSTM_O, false, false).empty());
  EXPECT_EQ(missing_inputs(VariantId::STR_GGRNN_V, false, false),
            (std::vector<std::string>{"vislets", "scene map"}));
  try {
    require_inputs(VariantId::STR_GGRNN_V, false, true, "eth");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("vislets"), std::string::npos);
  }
}

// --- predict ---------------------------------------------------------------

struct Fixture {
  std::vector<TrajectoryWindow> windows;
  SceneMap scene = synthetic_scene();
};

Fixture make_fixture(bool vislets, std::size_t episodes = 3) {
  SyntheticSceneConfig sc;
  sc.episodes = episodes;
  sc.vislets = vislets;
  Fixture f;
  f.windows = build_windows(synthetic_records(sc), 8, 12, 20);
  return f;
}

ModelConfig small_config(VariantId id) {
  ModelConfig c;
  c.variant = id;
  c.hidden = 6;
  c.dec_hidden = 5;
  c.nmf_max_iters = 50;
  return c;
}

TEST(Predict, PositionsOnlyBaselineRuns) {
  Fixture fx = make_fixture(false);
  Model m = Model::create(small_config(VariantId::LSTM_O), 3);
  EXPECT_FALSE(m.params.count("embed.w_vis"));
  EXPECT_FALSE(m.params.count("glstm_o.w0"));
  Tape t;
  ForwardResult r = forward(t, m, fx.windows[0], nullptr, ModelState{}, {});
  EXPECT_EQ(r.prediction.rows(), kN);
  EXPECT_EQ(r.prediction.cols(), 24u);
  EXPECT_FALSE(r.band.has_value());
  for (double v : r.prediction.value().values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Predict, RefusesMissingInputs) {
  Fixture fx = make_fixture(false);
  Model m = Model::create(small_config(VariantId::STR_GGRNN_V), 3);
  Tape t;
  EXPECT_THROW(forward(t, m, fx.windows[0], &fx.scene, ModelState{}, {}), UsageError);
  Model c = Model::create(small_config(VariantId::ST_GGRNN), 3);
  EXPECT_THROW(forward(t, c, fx.windows[0], nullptr, ModelState{}, {}), UsageError);
}

TEST(Predict, ZeroParametersGiveResidualBaseline) {
  Fixture fx = make_fixture(true);
  for (const VariantSpec& v : kVariants) {
    Model m = Model::create(small_config(v.id), 4).zeroed();
    ForwardOptions opt;
    opt.proposals = 3;
    Tape t;
    const TrajectoryWindow& w = fx.windows[1];
    const Dense2D x = forward(t, m, w, &fx.scene, ModelState{}, opt).prediction.value();
    for (std::size_t k = 0; k < w.size(); ++k)
      for (std::size_t s = 0; s < 12; ++s) {
        EXPECT_EQ(x(k, 2 * s), w.observed[k](7, 0)) << v.name;
        EXPECT_EQ(x(k, 2 * s + 1), w.observed[k](7, 1)) << v.name;
      }
  }
}

TEST(Predict, DeterministicForEveryVariant) {
  Fixture fx = make_fixture(true);
  for (const VariantSpec& v : kVariants) {
    Model m = Model::create(small_config(v.id), 5);
    ForwardOptions opt;
    opt.proposals = 4;
    opt.band_seed = 99;
    opt.workers = 3;
    auto run = [&] {
      ModelState s;
      s.seed = 17;
      std::vector<Dense2D> out;
      for (const auto& w : fx.windows) {
        Tape t;
        ForwardResult r = forward(t, m, w, &fx.scene, s, opt);
        out.push_back(r.prediction.value());
        s = r.next;
      }
      return out;
    };
    EXPECT_EQ(run(), run()) << v.name;
  }
}

TEST(Predict, StateFollowsPedestrianIds) {
  Fixture fx = make_fixture(false);
  Model m = Model::create(small_config(VariantId::LSTM_O), 6);
  ModelState prev;
  prev.seed = 1;
  prev.ped_ids = {fx.windows[0].ped_ids[2]};
  prev.social = GridLSTMState::zeros(kN, 6);
  prev.visuo = GridLSTMState::zeros(kN, 6);
  prev.social.h[0](0, 3) = 0.75;
  const ModelState s = m.align(prev, fx.windows[0]);
  EXPECT_EQ(s.social.h[0](2, 3), 0.75);
  EXPECT_EQ(s.social.h[0](0, 3), 0.0);
  // Unseen pedestrians draw h_O from their id; the draw is stable.
  EXPECT_NE(s.visuo.h[0](0, 0), 0.0);
  EXPECT_EQ(m.align(prev, fx.windows[0]).visuo.h[0], s.visuo.h[0]);
}

TEST(Predict, RejectsMismatchedHorizon) {
  Fixture fx = make_fixture(false);
  ModelConfig c = small_config(VariantId::ST);
  c.pred = 8;
  Model m = Model::create(c, 1);
  Tape t;
  EXPECT_THROW(forward(t, m, fx.windows[0], nullptr, ModelState{}, {}), UsageError);
  c.obs = 6;
  EXPECT_THROW(Model::create(c, 1), UsageError);
}

}  // namespace
}  // namespace strgg
