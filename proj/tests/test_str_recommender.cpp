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

#include <set>
#include <sstream>

#include "strgg/model/recommender.hpp"
#include "strgg/numerics/rng.hpp"
#include "support/gradcheck.hpp"

namespace strgg {
namespace {

constexpr std::size_t kN = 20;

Dense2D triple_loop(const Dense2D& a, const Dense2D& b) {
  Dense2D c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

ProposalInputs random_inputs(Rng& rng, std::size_t present = kN) {
  ProposalInputs in;
  in.attention = ad::softmax_rows_value(rng.uniform_matrix(kN, kN, -1, 1));
  in.c_map = rng.uniform_matrix(8, 8, 0, 1);
  in.hidden = rng.uniform_matrix(kN, 12, -1, 1);
  in.present.assign(kN, false);
  for (std::size_t i = 0; i < present; ++i) in.present[i] = true;
  in.max_iters = 60;
  return in;
}

// --- soft attention ----------------------------------------------------------

TEST(SoftAttention, ConstantRowIsUniform) {
  Tape t;
  const Dense2D a = soft_attention(t.constant(Dense2D(3, 5, 2.5))).value();
  for (double v : a.values()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(SoftAttention, DominantEntrySaturates) {
  Dense2D f(1, 4);
  f(0, 2) = 50.0 * 2.0;  // +50 after the 1/sqrt(4) scale
  Tape t;
  const Dense2D a = soft_attention(t.constant(f)).value();
  EXPECT_NEAR(a(0, 2), 1.0, 1e-12);
  EXPECT_GT(a(0, 0), 0.0);
}

TEST(SoftAttention, RowsSumToOne) {
  Rng rng(1);
  Tape t;
  const Dense2D a = soft_attention(t.constant(rng.uniform_matrix(kN, kN, -4, 4))).value();
  for (std::size_t i = 0; i < kN; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < kN; ++j) {
      EXPECT_GT(a(i, j), 0.0);
      s += a(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftAttention, EmptyIsDomainError) {
  Tape t;
  EXPECT_THROW(soft_attention(t.constant(Dense2D())), DomainError);
}

// --- weight_context ------------------------------------------------------------

TEST(WeightContext, IdentityKeepsFeatures) {
  Rng rng(2);
  const Dense2D fo = rng.uniform_matrix(kN, 8, -1, 1);
  Tape t;
  EXPECT_EQ(weight_context(t.constant(Dense2D::identity(kN)), t.constant(fo)).value(), fo);
}

TEST(WeightContext, UniformGivesColumnMean) {
  Rng rng(3);
  const Dense2D fo = rng.uniform_matrix(kN, 8, -1, 1);
  Tape t;
  const Dense2D out = weight_context(t.constant(Dense2D(kN, kN, 1.0 / kN)), t.constant(fo)).value();
  for (std::size_t j = 0; j < 8; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < kN; ++i) mean += fo(i, j) / kN;
    for (std::size_t i = 0; i < kN; ++i) EXPECT_NEAR(out(i, j), mean, 1e-12);
  }
}

TEST(WeightContext, MatchesTripleLoop) {
  Rng rng(4);
  const Dense2D a = rng.uniform_matrix(kN, kN, 0, 1), fo = rng.uniform_matrix(kN, 8, -1, 1);
  Tape t;
  EXPECT_LE(max_abs_diff(weight_context(t.constant(a), t.constant(fo)).value(), triple_loop(a, fo)), 1e-12);
  EXPECT_THROW(weight_context(t.constant(Dense2D(kN, 3)), t.constant(fo)), DimensionError);
}

TEST(AttentionGradients, FiniteDifferences) {
  Rng rng(5);
  auto r = testing::grad_check(
      [](Tape&, const std::vector<Var>& in) { return weight_context(soft_attention(in[0]), in[1]); },
      {rng.uniform_matrix(4, 4, -1, 1), rng.uniform_matrix(4, 3, -1, 1)});
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

// --- proposals -----------------------------------------------------------------

TEST(ProposeAdjacency, ZeroContextIsDegenerate) {
  Rng rng(6);
  ProposalInputs in = random_inputs(rng);
  in.c_map = Dense2D(8, 8);
  const AdjacencyProposal p = propose_adjacency(in, 11);
  EXPECT_TRUE(p.degenerate);
  EXPECT_EQ(max_abs_diff(p.a, Dense2D(kN, kN)), 0.0);
}

TEST(ProposeAdjacency, SeedDeterminesProposal) {
  Rng rng(7);
  const ProposalInputs in = random_inputs(rng);
  const AdjacencyProposal a = propose_adjacency(in, 42, 3), b = propose_adjacency(in, 42, 3);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.seed, 42u);
  EXPECT_EQ(a.index, 3u);
}

TEST(ProposeAdjacency, EntriesInUnitIntervalWithUnitMax) {
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const ProposalInputs in = random_inputs(rng, 3 + rep);
    const AdjacencyProposal p = propose_adjacency(in, 100 + rep);
    ASSERT_FALSE(p.degenerate);
    for (double v : p.a.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NEAR(max_value(p.a), 1.0, 1e-12);
    // Padding rows and columns never receive weight.
    for (std::size_t i = 0; i < kN; ++i)
      for (std::size_t j = 0; j < kN; ++j)
        if (!in.present[i] || !in.present[j]) {
          EXPECT_EQ(p.a(i, j), 0.0);
        }
  }
}

TEST(ProposeAdjacency, ShapeErrors) {
  Rng rng(9);
  ProposalInputs in = random_inputs(rng);
  in.attention = Dense2D(kN, kN - 1);
  EXPECT_THROW(propose_adjacency(in, 1), DimensionError);
  in = random_inputs(rng);
  in.hidden = Dense2D(kN - 1, 12);
  EXPECT_THROW(propose_adjacency(in, 1), DimensionError);
}

// --- bands and selection -------------------------------------------------------

ProposalScorer sum_scorer() {
  return [](const Dense2D& a) { return std::make_pair(a, sum(a) / static_cast<double>(a.size())); };
}

TEST(Band, SingleProposal) {
  Rng rng(10);
  const ProposalBand b = generate_band(1, random_inputs(rng), 5, sum_scorer());
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(b.trajectories.size(), 1u);
  EXPECT_EQ(b.errors.size(), 1u);
  EXPECT_EQ(b.proposals[0].seed, 5u);
}

TEST(Band, SeedScheduleGivesDistinctProposals) {
  Rng rng(11);
  const ProposalInputs in = random_inputs(rng);
  const ProposalBand b = generate_band(10, in, 1000, sum_scorer(), 4);
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(b.proposals[i].seed, 1000u + i);
    EXPECT_EQ(b.proposals[i].index, i);
    EXPECT_GE(b.errors[i], 0.0);
    const auto v = b.proposals[i].a.values();
    distinct.insert(std::vector<double>(v.begin(), v.end()));
  }
  EXPECT_EQ(distinct.size(), 10u);
}

TEST(Band, WorkerCountDoesNotChangeResult) {
  Rng rng(12);
  const ProposalInputs in = random_inputs(rng);
  const ProposalBand one = generate_band(6, in, 7, sum_scorer(), 1);
  const ProposalBand many = generate_band(6, in, 7, sum_scorer(), 3);
  EXPECT_EQ(one.errors, many.errors);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(one.proposals[i].a, many.proposals[i].a);
}

TEST(Band, SmallerBandIsPrefix) {
  Rng rng(13);
  const ProposalInputs in = random_inputs(rng);
  const ProposalBand small = generate_band(2, in, 50, sum_scorer());
  const ProposalBand big = generate_band(5, in, 50, sum_scorer());
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(small.proposals[i].a, big.proposals[i].a);
  EXPECT_LE(select_best(big).error, select_best(small).error);
}

TEST(Band, RejectsEmptyAndPropagatesErrors) {
  Rng rng(14);
  const ProposalInputs in = random_inputs(rng);
  EXPECT_THROW(generate_band(0, in, 1, sum_scorer()), UsageError);
  ProposalScorer bad = [](const Dense2D&) -> std::pair<Dense2D, double> { throw DomainError("boom"); };
  EXPECT_THROW(generate_band(3, in, 1, bad, 2), DomainError);
}

ProposalBand band_with_errors(const std::vector<double>& errors) {
  ProposalBand b;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    AdjacencyProposal p;
    p.index = i;
    p.a = Dense2D(2, 2, static_cast<double>(i));
    b.proposals.push_back(p);
    b.trajectories.push_back(Dense2D(1, 2, static_cast<double>(i)));
    b.errors.push_back(errors[i]);
  }
  return b;
}

TEST(SelectBest, ArgMin) {
  const Selection s = select_best(band_with_errors({0.5, 0.2, 0.9}));
  EXPECT_EQ(s.index, 1u);
  EXPECT_EQ(s.error, 0.2);
  EXPECT_EQ(s.adjacency, Dense2D(2, 2, 1.0));
}

TEST(SelectBest, TiesGoToLowestIndex) {
  EXPECT_EQ(select_best(band_with_errors({0.3, 0.3, 0.3})).index, 0u);
  EXPECT_THROW(select_best(ProposalBand{}), UsageError);
}

TEST(SelectBest, SelectedErrorIsBandMinimum) {
  Rng rng(15);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> e(1 + rep % 20);
    for (double& v : e) v = rng.uniform(0, 3);
    const Selection s = select_best(band_with_errors(e));
    EXPECT_EQ(s.error, *std::min_element(e.begin(), e.end()));
    for (double v : e) EXPECT_LE(s.error, v);
  }
}

// --- policies ------------------------------------------------------------------

TEST(Policy, InverseDistance) {
  const Dense2D a = sgtv_adjacency(Dense2D{{0.0, 0.0}, {2.0, 0.0}});
  EXPECT_EQ(a(0, 1), 0.5);
  EXPECT_EQ(a(1, 0), 0.5);
  EXPECT_EQ(a(0, 0), 0.0);
  EXPECT_EQ(a(1, 1), 0.0);
}

TEST(Policy, CoincidentPedestriansAreCapped) {
  const Dense2D a = sgtv_adjacency(Dense2D{{1.0, 1.0}, {1.0, 1.0}});
  EXPECT_EQ(a(0, 1), 1.0 / kSgtvEpsilon);
  EXPECT_TRUE(std::isfinite(a(1, 0)));
}

TEST(Policy, SoftmaxOfZeroHiddenIsUniform) {
  Rng rng(16);
  const Dense2D a = mcr_adjacency(rng.uniform_matrix(4, 6, -1, 1), Dense2D(4, 6));
  for (double v : a.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Policy, DispatchAndParse) {
  PolicyInputs in;
  in.positions = Dense2D{{0.0, 0.0}, {2.0, 0.0}};
  EXPECT_EQ(adjacency_policy(AdjacencyPolicy::kSgtvInverseDistance, in)(0, 1), 0.5);
  EXPECT_THROW(adjacency_policy(AdjacencyPolicy::kStrMinError, in), UsageError);
  in.band = [] { return band_with_errors({0.4, 0.1}); };
  EXPECT_EQ(adjacency_policy(AdjacencyPolicy::kStrMinError, in), Dense2D(2, 2, 1.0));
  EXPECT_EQ(parse_policy("mcr"), AdjacencyPolicy::kMcrSoftmaxHidden);
  EXPECT_THROW(parse_policy("gat"), UsageError);
}

// Tiny bridge between policies: an inverse-distance graph factorized at full
// rank is reconstructed.
TEST(Policy, FullRankFactorizationReconstructsInverseDistance) {
  const Dense2D a = sgtv_adjacency(Dense2D{{0.0, 0.0}, {2.0, 0.0}});
  NmfOptions opt;
  opt.rank = 2;
  opt.max_iters = 500;
  opt.tol = 0.0;
  opt.seed = 3;
  EXPECT_LT(nmf(a, opt).final_error(), 1e-6);
}

// --- state update --------------------------------------------------------------

TEST(UpdateStates, IdentityZeroAndOracle) {
  Rng rng(17);
  const Dense2D h = rng.uniform_matrix(kN, 128, -1, 1);
  EXPECT_EQ(update_states(Dense2D::identity(kN), h), h);
  EXPECT_EQ(max_abs_diff(update_states(Dense2D(kN, kN), h), Dense2D(kN, 128)), 0.0);
  const Dense2D a = rng.uniform_matrix(kN, kN, 0, 1);
  EXPECT_LE(max_abs_diff(update_states(a, h), triple_loop(a, h)), 1e-12);
  EXPECT_THROW(update_states(Dense2D(kN, kN - 1), h), DimensionError);
}

TEST(BandCsv, Rows) {
  ProposalBand b = band_with_errors({0.25, 0.5});
  b.proposals[1].degenerate = true;
  b.proposals[1].seed = 9;
  std::ostringstream band, adj;
  write_band_rows(band, 7, b);
  write_adjacency_rows(adj, 7, b);
  EXPECT_EQ(band.str(), "7,0,0,0.25,0\n7,1,9,0.5,1\n");
  EXPECT_EQ(adj.str(), "7,0,2,0,0,0,0\n7,1,2,1,1,1,1\n");
}

}  // namespace
}  // namespace strgg
