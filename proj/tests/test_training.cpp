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

#include <sstream>

#include "strgg/data/synthetic.hpp"
#include "strgg/io/checkpoint.hpp"
#include "strgg/train/training.hpp"
#include "support/gradcheck.hpp"
#include "support/tmpdir.hpp"

namespace strgg {
namespace {

double oracle_loss(const Dense2D& p, const Dense2D& x, const Dense2D& mask) {
  double total = 0.0, count = 0.0;
  for (std::size_t i = 0; i < mask.rows(); ++i)
    for (std::size_t s = 0; s < mask.cols(); ++s)
      if (mask(i, s) > 0.5) {
        const double dx = p(i, 2 * s) - x(i, 2 * s), dy = p(i, 2 * s + 1) - x(i, 2 * s + 1);
        total += std::sqrt(dx * dx + dy * dy);
        count += 1.0;
      }
  return total / count;
}

Dense2D random_mask(Rng& rng, std::size_t n, std::size_t l) {
  Dense2D m(n, l);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.bernoulli(0.8) ? 1.0 : 0.0;
  m(0, 0) = 1.0;
  return m;
}

double tape_loss(const Dense2D& p, const Dense2D& x, const Dense2D& mask) {
  Tape t;
  return trajectory_loss(t.constant(p), x, mask).value()(0, 0);
}

TEST(Loss, ZeroAtTruth) {
  Rng rng(1);
  const Dense2D x = rng.uniform_matrix(4, 24, -5, 5);
  EXPECT_EQ(tape_loss(x, x, Dense2D::ones(4, 12)), 0.0);
  EXPECT_EQ(trajectory_loss(x, x, Dense2D::ones(4, 12)), 0.0);
}

TEST(Loss, ConstantOffset) {
  Rng rng(2);
  const Dense2D x = rng.uniform_matrix(3, 16, -5, 5);
  Dense2D p = x;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t s = 0; s < 8; ++s) {
      p(i, 2 * s) += 0.3;
      p(i, 2 * s + 1) += 0.4;
    }
  EXPECT_NEAR(tape_loss(p, x, Dense2D::ones(3, 8)), 0.5, 1e-15);
}

TEST(Loss, MatchesDirectSummation) {
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rep % 20, l = rep % 2 ? 8 : 12;
    const Dense2D p = rng.uniform_matrix(n, 2 * l, -10, 10), x = rng.uniform_matrix(n, 2 * l, -10, 10);
    const Dense2D m = random_mask(rng, n, l);
    const double want = oracle_loss(p, x, m);
    EXPECT_NEAR(tape_loss(p, x, m), want, 1e-9);
    EXPECT_NEAR(trajectory_loss(p, x, m), want, 1e-9);
  }
}

TEST(Loss, AllMaskedIsUsageError) {
  const Dense2D p(2, 16);
  Tape t;
  EXPECT_THROW(trajectory_loss(t.constant(p), p, Dense2D(2, 8)), UsageError);
  EXPECT_THROW(trajectory_loss(p, p, Dense2D(2, 8)), UsageError);
  EXPECT_THROW(trajectory_loss(t.constant(p), p, Dense2D(2, 7)), DimensionError);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const Dense2D x = rng.uniform_matrix(3, 16, -1, 1), mask = random_mask(rng, 3, 8);
  auto r = testing::grad_check(
      [&](Tape&, const std::vector<Var>& in) { return trajectory_loss(in[0], x, mask); },
      {rng.uniform_matrix(3, 16, -1, 1)});
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(Dropout, KeepOneIsIdentity) {
  Rng rng(5);
  const Dense2D x = rng.uniform_matrix(5, 7, -1, 1);
  EXPECT_EQ(apply_dropout(x, 1.0, 9), x);
  EXPECT_EQ(apply_dropout(x, 0.5, 9, /*training=*/false), x);
}

TEST(Dropout, FixedSeedFixedMask) {
  const Dense2D x = Dense2D::ones(6, 6);
  const Dense2D a = apply_dropout(x, 0.5, 77), b = apply_dropout(x, 0.5, 77);
  EXPECT_EQ(a, b);
  for (double v : a.values()) EXPECT_TRUE(v == 0.0 || v == 2.0);
  EXPECT_NE(a, apply_dropout(x, 0.5, 78));
  EXPECT_THROW(apply_dropout(x, 0.0, 1), UsageError);
  EXPECT_THROW(apply_dropout(x, 1.5, 1), UsageError);
}

TEST(Dropout, PreservesExpectation) {
  Rng rng(6);
  const Dense2D x = rng.uniform_matrix(4, 5, 0.5, 1.5);
  const double want = sum(x) / static_cast<double>(x.size());
  double total = 0.0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) total += sum(apply_dropout(x, 0.8, static_cast<std::uint64_t>(s)));
  const double got = total / (seeds * static_cast<double>(x.size()));
  EXPECT_LT(std::abs(got - want) / want, 0.02);
}

// --- trainer -----------------------------------------------------------------

std::vector<TrajectoryWindow> synthetic_windows(std::size_t episodes, std::uint64_t seed,
                                                bool vislets = false) {
  SyntheticSceneConfig sc;
  sc.episodes = episodes;
  sc.seed = seed;
  sc.vislets = vislets;
  return build_windows(synthetic_records(sc), 8, 12, 20);
}

ModelConfig small_model(VariantId id) {
  ModelConfig c;
  c.variant = id;
  c.hidden = 6;
  c.dec_hidden = 5;
  c.nmf_max_iters = 40;
  return c;
}

TrainerConfig trainer_for(const ModelConfig& m) {
  TrainerConfig t;
  t.variant = m.variant;
  t.obs = m.obs;
  t.pred = m.pred;
  t.max_size = m.max_peds;
  t.proposals = 3;
  return t;
}

TEST(TrainStep, ZeroModelLossIsConstantPositionError) {
  const auto windows = synthetic_windows(1, 3);
  const TrajectoryWindow& w = windows[0];
  Model m = Model::create(small_model(VariantId::ST), 1).zeroed();
  Trainer tr(m, trainer_for(m.config));
  const StepResult r = tr.step(w, nullptr, 0, 0);
  double total = 0.0, count = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    for (std::size_t s = 0; s < 12; ++s) {
      total += std::hypot(w.future[k](s, 0) - w.observed[k](7, 0), w.future[k](s, 1) - w.observed[k](7, 1));
      count += 1.0;
    }
  EXPECT_NEAR(r.loss, total / count, 1e-12);
  EXPECT_NEAR(r.ade, r.loss, 1e-12);
}

TEST(TrainStep, OverfitsOneWindow) {
  const auto windows = synthetic_windows(1, 4);
  for (VariantId id : {VariantId::ST, VariantId::STR}) {
    Model m = Model::create(small_model(id), 2);
    TrainerConfig tc = trainer_for(m.config);
    tc.dropout_keep = 1.0;
    Trainer tr(m, tc);
    double prev = 1e300;
    for (int k = 0; k < 10; ++k) {
      tr.reset_state();
      const double loss = tr.step(windows[0], nullptr, 0, 0).loss;
      EXPECT_LT(loss, prev) << variant_name(id) << " step " << k;
      prev = loss;
    }
  }
}

// d loss / d W_o through the whole forward pass, including the selected
// proposal path of a recommender variant.
TEST(TrainStep, OutputWeightGradientMatchesFiniteDifferences) {
  const auto windows = synthetic_windows(1, 5);
  for (VariantId id : {VariantId::ST, VariantId::STR}) {
    Model m = Model::create(small_model(id), 3);
    // Away from the all-tied band of a zero-initialized decoder.
    Rng rng(31);
    m.params["kernel.w_o"] = rng.uniform_matrix(5, 24, -0.05, 0.05);
    ForwardOptions opt;
    opt.proposals = 3;
    auto loss_of = [&](const Model& mm, ParameterSet* grads) {
      Tape t;
      ForwardResult r = forward(t, mm, windows[0], nullptr, ModelState{}, opt);
      const WindowTensors wt = mm.tensors(windows[0]);
      Var loss = trajectory_loss(r.prediction, wt.truth, wt.step_mask);
      if (grads) {
        t.backward(loss);
        *grads = t.parameter_grads();
      }
      return loss.value()(0, 0);
    };
    ParameterSet grads;
    loss_of(m, &grads);
    const Dense2D& g = grads.at("kernel.w_o");
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t k = 0; k < g.size(); ++k) {
      Model up = m, down = m;
      up.params["kernel.w_o"][k] += h;
      down.params["kernel.w_o"][k] -= h;
      const double numeric = (loss_of(up, nullptr) - loss_of(down, nullptr)) / (2 * h);
      worst = std::max(worst, testing::rel_error(g[k], numeric));
    }
    EXPECT_LT(worst, 1e-3) << variant_name(id);
  }
}

TEST(Trainer, RejectsMismatchedConfig) {
  Model m = Model::create(small_model(VariantId::ST), 1);
  TrainerConfig tc = trainer_for(m.config);
  tc.variant = VariantId::STR;
  EXPECT_THROW(Trainer(m, tc), UsageError);
  tc = trainer_for(m.config);
  tc.dropout_keep = 0.0;
  EXPECT_THROW(Trainer(m, tc), UsageError);
  tc = trainer_for(m.config);
  tc.proposals = 0;
  EXPECT_THROW(Trainer(m, tc), UsageError);
}

// --- online run ----------------------------------------------------------------

TEST(OnlineRun, EmptyStreamWarns) {
  std::vector<std::string> seen;
  ScopedWarningSink sink([&](const std::string& m) { seen.push_back(m); });
  Model m = Model::create(small_model(VariantId::ST), 1);
  Trainer tr(m, trainer_for(m.config));
  const RunLog log = online_run({}, nullptr, tr);
  EXPECT_TRUE(log.rows.empty());
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("empty"), std::string::npos);
}

TEST(OnlineRun, RowsPerWindowAndEpoch) {
  const auto windows = synthetic_windows(4, 6);
  Model m = Model::create(small_model(VariantId::STR), 1);
  TrainerConfig tc = trainer_for(m.config);
  tc.epochs = 2;
  Trainer tr(m, tc);
  std::ostringstream runlog, bands, adj;
  const RunLog log = online_run(windows, nullptr, tr, {&runlog, &bands, &adj});
  ASSERT_EQ(log.rows.size(), windows.size() * 2);
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    EXPECT_EQ(log.rows[k].step, k);
    EXPECT_EQ(log.rows[k].epoch, k / windows.size());
    EXPECT_GE(log.rows[k].proposal, 0);
    EXPECT_LT(log.rows[k].proposal, 3);
  }
  std::istringstream lines(runlog.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, RunLog::kHeader);
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, log.rows.size());
  // Three proposals per window in the band and adjacency logs.
  const std::string band_text = bands.str(), adj_text = adj.str();
  EXPECT_EQ(std::count(band_text.begin(), band_text.end(), '\n'), 1 + 3 * 8);
  EXPECT_EQ(std::count(adj_text.begin(), adj_text.end(), '\n'), 1 + 3 * 8);
}

TEST(OnlineRun, DeterministicUnderFixedSeed) {
  const auto windows = synthetic_windows(3, 7, true);
  const SceneMap scene = synthetic_scene();
  for (VariantId id : {VariantId::ST_V, VariantId::STR_GGRNN_V}) {
    auto run = [&] {
      Model m = Model::create(small_model(id), 11);
      TrainerConfig tc = trainer_for(m.config);
      tc.workers = 2;
      Trainer tr(m, tc);
      RunLog log = online_run(windows, &scene, tr);
      for (RunRow& r : log.rows) r.wall_ms = 0.0;
      std::ostringstream out;
      log.write_csv(out);
      return std::make_pair(out.str(), m.params);
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.first, b.first) << variant_name(id);
    EXPECT_EQ(a.second, b.second) << variant_name(id);
  }
}

// Parameters after window w depend only on windows up to w.
TEST(OnlineRun, ImmediateUpdates) {
  auto windows = synthetic_windows(4, 8);
  auto prefix = std::vector<TrajectoryWindow>(windows.begin(), windows.begin() + 2);
  auto train = [](const std::vector<TrajectoryWindow>& ws) {
    Model m = Model::create(small_model(VariantId::ST), 12);
    Trainer tr(m, trainer_for(m.config));
    online_run(ws, nullptr, tr);
    return m.params;
  };
  const ParameterSet after_prefix = train(prefix);
  Model m = Model::create(small_model(VariantId::ST), 12);
  Trainer tr(m, trainer_for(m.config));
  tr.step(windows[0], nullptr, 0, 0);
  tr.step(windows[1], nullptr, 0, 1);
  EXPECT_EQ(m.params, after_prefix);
}

// --- checkpoints ---------------------------------------------------------------

TEST(Checkpoint, RoundTrip) {
  const auto dir = testing::scratch_dir("checkpoint");
  ModelConfig c = small_model(VariantId::STR_GGRNN_V);
  c.input_scale = 0.1 / 3.0;
  c.policy = AdjacencyPolicy::kMcrSoftmaxHidden;
  const Model m = Model::create(c, 5);
  const std::string path = (dir / "m.ckpt").string();
  save_checkpoint(path, m);
  const Model back = load_checkpoint(path);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(model_config_text(back.config), model_config_text(m.config));
  EXPECT_EQ(back.config.input_scale, c.input_scale);
}

TEST(Checkpoint, Errors) {
  const auto dir = testing::scratch_dir("checkpoint_errors");
  EXPECT_THROW(load_checkpoint((dir / "missing").string()), IoError);
  EXPECT_THROW(load_checkpoint(testing::write_text(dir / "junk", "not a checkpoint at all")), FormatError);
  const std::string path = (dir / "m.ckpt").string();
  save_checkpoint(path, Model::create(small_model(VariantId::ST), 1));
  const std::string full = testing::read_text(path);
  EXPECT_THROW(load_checkpoint(testing::write_text(dir / "cut", full.substr(0, full.size() - 5))), FormatError);
  std::string bumped = full;
  bumped[8] = 9;  // version
  EXPECT_THROW(load_checkpoint(testing::write_text(dir / "ver", bumped)), FormatError);
  EXPECT_THROW(load_checkpoint(testing::write_text(dir / "tail", full + "x")), FormatError);
}

}  // namespace
}  // namespace strgg
