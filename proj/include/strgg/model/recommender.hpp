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
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "strgg/numerics/dense.hpp"
#include "strgg/numerics/nmf.hpp"
#include "strgg/numerics/tape.hpp"

namespace strgg {

/// Row softmax of F_hat / sqrt(cols).
inline Var soft_attention(Var f_hat) {
  if (f_hat.value().empty()) throw DomainError("soft_attention: empty feature map");
  return ad::softmax_rows(ad::scale(f_hat, 1.0 / std::sqrt(static_cast<double>(f_hat.cols()))));
}

/// f_O' = a f_O.
inline Var weight_context(Var a, Var f_o) {
  if (a.cols() != f_o.rows()) {
    throw DimensionError("weight_context: a " + a.value().shape() + " vs f_O " + f_o.value().shape());
  }
  return ad::matmul(a, f_o);
}

struct AdjacencyProposal {
  Dense2D a;  // [n x n], entries in [0, 1]
  std::uint64_t seed = 0;
  std::size_t index = 0;
  bool degenerate = false;  // W_a W_a^T vanished on the present block
  double nmf_error = 0.0;
};

/// Everything a proposal is generated from; shared read-only by workers.
struct ProposalInputs {
  Dense2D attention;       // a, [n x n]
  Dense2D c_map;           // [8 x 8]
  Dense2D hidden;          // H_t, [n x H]
  Dense2D prev_adjacency;  // A_{t-1}, [n x n]; all ones before the first window
  std::vector<bool> present;  // rows holding a real pedestrian; empty = all
  std::size_t rank = 8;
  std::size_t max_iters = 500;
  double tol = 1e-8;
};

/// One stochastic adjacency: NMF of the context Gram matrix lifted to
/// [n x n], warm-started from the attention-weighted previous adjacency and
/// the hidden states, then A = W_a W_a^T / max.
inline AdjacencyProposal propose_adjacency(const ProposalInputs& in, std::uint64_t seed,
                                           std::size_t index = 0) {
  const std::size_t n = in.attention.rows();
  if (in.attention.cols() != n) throw DimensionError("propose_adjacency: attention " + in.attention.shape());
  Dense2D prev = in.prev_adjacency.empty() ? Dense2D::ones(n, n) : in.prev_adjacency;
  detail::require_same(prev, in.attention, "propose_adjacency prev/attention");
  if (in.hidden.rows() != n) throw DimensionError("propose_adjacency: hidden " + in.hidden.shape());

  Dense2D target = resize_bilinear(matmul_nt(in.c_map, in.c_map), n, n);
  for (double& v : target.values()) v = std::max(v, 0.0);

  NmfOptions opt;
  opt.rank = std::min(in.rank, n);
  opt.max_iters = in.max_iters;
  opt.tol = in.tol;
  opt.seed = seed;
  opt.init_w = resize_bilinear(hadamard(in.attention, prev), n, opt.rank);
  opt.init_h = resize_bilinear(map(transpose(in.hidden), [](double v) { return std::abs(v); }),
                               opt.rank, n);
  const NmfResult f = nmf(target, opt);

  AdjacencyProposal p;
  p.seed = seed;
  p.index = index;
  p.nmf_error = f.final_error();
  p.a = matmul_nt(f.w, f.w);
  auto live = [&](std::size_t i) { return in.present.empty() || in.present[i]; };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!live(i) || !live(j)) p.a(i, j) = 0.0;
  const double peak = max_value(p.a);
  if (!(peak > 0.0)) {
    p.a = Dense2D(n, n);
    p.degenerate = true;
  } else {
    for (double& v : p.a.values()) v /= peak;
  }
  return p;
}

struct ProposalBand {
  std::vector<AdjacencyProposal> proposals;
  std::vector<Dense2D> trajectories;  // per proposal, [n x 2l]
  std::vector<double> errors;         // per proposal, meters

  std::size_t size() const noexcept { return proposals.size(); }
};

/// Maps an adjacency to (prediction, error against ground truth).
using ProposalScorer = std::function<std::pair<Dense2D, double>(const Dense2D& adjacency)>;

/// Runs `fn(i)` for i in [0, count) on up to `workers` threads. The first
/// exception is rethrown after all workers join.
inline void parallel_for(std::size_t count, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// P proposals with seeds base_seed, base_seed + 1, ..., each scored
/// independently.
inline ProposalBand generate_band(std::size_t count, const ProposalInputs& in,
                                  std::uint64_t base_seed, const ProposalScorer& score,
                                  std::size_t workers = 1) {
  if (count < 1) throw UsageError("generate_band: P must be >= 1");
  ProposalBand band;
  band.proposals.resize(count);
  band.trajectories.resize(count);
  band.errors.resize(count);
  parallel_for(count, workers, [&](std::size_t i) {
    band.proposals[i] = propose_adjacency(in, base_seed + i, i);
    auto [traj, err] = score(band.proposals[i].a);
    if (!(err >= 0.0)) throw NumericalError(detail::concat("proposal ", i, " error ", err));
    band.trajectories[i] = std::move(traj);
    band.errors[i] = err;
  });
  return band;
}

struct Selection {
  std::size_t index = 0;
  Dense2D adjacency;
  Dense2D trajectory;
  double error = 0.0;
};

/// Minimum-error proposal; ties go to the lowest index.
inline Selection select_best(const ProposalBand& band) {
  if (band.size() == 0) throw UsageError("select_best: empty band");
  std::size_t best = 0;
  for (std::size_t i = 1; i < band.size(); ++i)
    if (band.errors[i] < band.errors[best]) best = i;
  return {best, band.proposals[best].a, band.trajectories[best], band.errors[best]};
}

enum class AdjacencyPolicy { kSgtvInverseDistance, kMcrSoftmaxHidden, kStrMinError };

inline AdjacencyPolicy parse_policy(const std::string& s) {
  if (s == "sgtv") return AdjacencyPolicy::kSgtvInverseDistance;
  if (s == "mcr") return AdjacencyPolicy::kMcrSoftmaxHidden;
  if (s == "str") return AdjacencyPolicy::kStrMinError;
  throw UsageError("unknown adjacency policy '" + s + "' (expected sgtv, mcr or str)");
}

inline constexpr double kSgtvEpsilon = 1e-6;

/// A_ij = 1 / ||x_i - x_j||, zero diagonal, capped at 1/eps.
inline Dense2D sgtv_adjacency(const Dense2D& positions) {
  const std::size_t n = positions.rows();
  Dense2D a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::hypot(positions(i, 0) - positions(j, 0), positions(i, 1) - positions(j, 1));
      a(i, j) = 1.0 / std::max(d, kSgtvEpsilon);
    }
  return a;
}

/// Row softmax of W H_t^T; W is [n x H].
inline Dense2D mcr_adjacency(const Dense2D& w, const Dense2D& hidden) {
  return ad::softmax_rows_value(matmul_nt(w, hidden));
}

struct PolicyInputs {
  Dense2D positions;  // [n x 2] current positions
  Dense2D hidden;     // H_t
  Dense2D w;          // MCR weights
  std::function<ProposalBand()> band;  // STR only
};

inline Dense2D adjacency_policy(AdjacencyPolicy policy, const PolicyInputs& in) {
  switch (policy) {
    case AdjacencyPolicy::kSgtvInverseDistance:
      return sgtv_adjacency(in.positions);
    case AdjacencyPolicy::kMcrSoftmaxHidden:
      return mcr_adjacency(in.w, in.hidden);
    case AdjacencyPolicy::kStrMinError:
      if (!in.band) throw UsageError("adjacency_policy: STR needs a band generator");
      return select_best(in.band()).adjacency;
  }
  throw UsageError("adjacency_policy: unknown policy");
}

/// H* = A H.
inline Dense2D update_states(const Dense2D& a, const Dense2D& h) {
  if (a.cols() != h.rows() || a.rows() != h.rows()) {
    throw DimensionError("update_states: A " + a.shape() + " vs H " + h.shape());
  }
  return matmul(a, h);
}

/// CSV rows: window,proposal_idx,seed,error,degenerate.
inline void write_band_rows(std::ostream& out, std::int64_t window, const ProposalBand& band) {
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < band.size(); ++i) {
    out << window << ',' << i << ',' << band.proposals[i].seed << ',' << band.errors[i] << ','
        << (band.proposals[i].degenerate ? 1 : 0) << '\n';
  }
  out.precision(old);
}

/// CSV rows: window,proposal_idx,n,a_00,a_01,... (row-major).
inline void write_adjacency_rows(std::ostream& out, std::int64_t window, const ProposalBand& band) {
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < band.size(); ++i) {
    const Dense2D& a = band.proposals[i].a;
    out << window << ',' << i << ',' << a.rows();
    for (double v : a.values()) out << ',' << v;
    out << '\n';
  }
  out.precision(old);
}

}  // namespace strgg
