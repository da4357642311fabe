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
#include <chrono>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "strgg/eval/metrics.hpp"
#include "strgg/log.hpp"
#include "strgg/model/model.hpp"
#include "strgg/numerics/optim.hpp"

namespace strgg {

/// Mean Euclidean error over unmasked (pedestrian, step) cells, on the tape.
inline Var trajectory_loss(Var pred, const Dense2D& truth, const Dense2D& mask) {
  detail::check_metric_shapes(pred.value(), truth, mask, "trajectory_loss");
  const double count = sum(mask);
  if (count == 0.0) throw UsageError("trajectory_loss: every step is masked");
  const std::size_t cells = mask.size();
  Var diff = ad::reshape(ad::sub(pred, truth), cells, 2);
  Dense2D weights(cells, 1);
  for (std::size_t k = 0; k < cells; ++k) weights[k] = mask[k] / count;
  return ad::sum(ad::mul(ad::row_norms(diff), weights));
}

/// Value form of the loss.
inline double trajectory_loss(const Dense2D& pred, const Dense2D& truth, const Dense2D& mask) {
  return ade(pred, truth, mask);
}

enum class OptimizerKind { kAdam, kSgd };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw UsageError("optimizer must be 'adam' or 'sgd', got '" + s + "'");
}

struct TrainerConfig {
  double lr = 5e-3;
  double decay = 0.95;  // per epoch
  double dropout_keep = 0.8;
  std::size_t max_size = kMaxPedestrians;
  std::size_t proposals = 20;  // P
  std::size_t obs = 8;
  std::size_t pred = 12;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  VariantId variant = VariantId::ST;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t workers = 1;

  void validate() const {
    if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) {
      throw UsageError(detail::concat("dropout_keep ", dropout_keep, " not in (0, 1]"));
    }
    if (proposals < 1) throw UsageError("P must be >= 1");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(lr > 0.0) || !(decay > 0.0)) throw UsageError("lr and decay must be positive");
  }
};

struct StepResult {
  double loss = 0.0;
  double ade = 0.0;
  double fde = 0.0;
  std::optional<std::size_t> proposal;  // recommender variants only
  std::optional<ProposalBand> band;
  Dense2D prediction;  // before the update
};

/// Owns the optimizer state and the hidden state carried between windows.
class Trainer {
 public:
  Trainer(Model& model, TrainerConfig cfg) : model_(model), cfg_(cfg) {
    cfg_.validate();
    const ModelConfig& m = model.config;
    if (m.variant != cfg_.variant || m.obs != cfg_.obs || m.pred != cfg_.pred ||
        m.max_peds != cfg_.max_size) {
      throw UsageError(detail::concat("trainer config (", variant_name(cfg_.variant), ", obs ",
                                      cfg_.obs, ", pred ", cfg_.pred, ", maxSize ", cfg_.max_size,
                                      ") does not match the model (", variant_name(m.variant),
                                      ", obs ", m.obs, ", pred ", m.pred, ", maxSize ", m.max_peds, ")"));
    }
    reset_state();
  }

  const TrainerConfig& config() const noexcept { return cfg_; }
  const ModelState& state() const noexcept { return state_; }
  Model& model() noexcept { return model_; }

  /// Forgets carried hidden state (new scene or epoch).
  void reset_state() {
    state_ = ModelState{};
    state_.seed = mix_seed(cfg_.seed, 0x5157);
  }

  double learning_rate(std::size_t epoch) const {
    return LearningRateSchedule{cfg_.lr, cfg_.decay}.at_epoch(epoch);
  }

  /// Forward, loss on the selected path, backward, immediate update.
  /// `step_index` is the position in the whole run and seeds this step.
  StepResult step(const TrajectoryWindow& window, const SceneMap* scene, std::size_t epoch,
                  std::uint64_t step_index) {
    ForwardOptions opt;
    opt.training = true;
    opt.dropout_keep = cfg_.dropout_keep;
    opt.dropout_seed = mix_seed(cfg_.seed, 2 * step_index);
    opt.proposals = cfg_.proposals;
    opt.band_seed = mix_seed(cfg_.seed, 2 * step_index + 1);
    opt.selection = BandSelection::kBest;
    opt.workers = cfg_.workers;

    Tape tape;
    ForwardResult r = forward(tape, model_, window, scene, state_, opt);
    const WindowTensors t = model_.tensors(window);
    Var loss = trajectory_loss(r.prediction, t.truth, t.step_mask);
    tape.backward(loss);
    const ParameterSet grads = tape.parameter_grads();
    const double lr = learning_rate(epoch);
    if (cfg_.optimizer == OptimizerKind::kAdam) {
      adam_.step(model_.params, grads, lr);
    } else {
      apply_gradients(model_.params, grads, lr);
    }

    StepResult s;
    s.loss = loss.value()(0, 0);
    s.prediction = r.prediction.value();
    s.ade = ade(s.prediction, t.truth, t.step_mask);
    s.fde = fde(s.prediction, t.truth, t.step_mask);
    if (r.band) s.proposal = r.selected;
    s.band = std::move(r.band);
    state_ = std::move(r.next);
    return s;
  }

 private:
  Model& model_;
  TrainerConfig cfg_;
  Adam adam_;
  ModelState state_;
};

struct RunRow {
  std::uint64_t step = 0;  // window_id column: position in the run
  std::int64_t source_window = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double ade = 0.0;
  double fde = 0.0;
  std::int64_t proposal = -1;  // -1 without a band
  double wall_ms = 0.0;
};

struct RunLog {
  std::vector<RunRow> rows;

  static constexpr const char* kHeader = "window_id,loss,ade,fde,proposal_idx,wall_ms";

  static void write_row(std::ostream& out, const RunRow& r) {
    out << r.step << ',' << std::setprecision(17) << r.loss << ',' << r.ade << ',' << r.fde << ','
        << r.proposal << ',' << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat
        << '\n';
  }

  void write_csv(std::ostream& out) const {
    out << kHeader << '\n';
    for (const RunRow& r : rows) write_row(out, r);
  }
};

/// A contiguous part of the training stream sharing one scene.
struct StreamSegment {
  const std::vector<TrajectoryWindow>* windows = nullptr;
  const SceneMap* scene = nullptr;
};

/// Optional incremental outputs; each is flushed after every window.
struct RunSinks {
  std::ostream* runlog = nullptr;
  std::ostream* bands = nullptr;
  std::ostream* adjacency = nullptr;
  std::size_t adjacency_every = 1;  // adjacency rows for every k-th step only
};

inline constexpr const char* kBandHeader = "window,proposal_idx,seed,error,degenerate";
inline constexpr const char* kAdjacencyHeader = "window,proposal_idx,n,values";

/// Sequential pass with one update per window, repeated for the configured
/// epochs. Hidden state restarts at each segment and each epoch.
inline RunLog online_run(std::span<const StreamSegment> segments, Trainer& trainer,
                         const RunSinks& sinks = {}) {
  RunLog log;
  std::size_t total = 0;
  for (const auto& s : segments) total += s.windows ? s.windows->size() : 0;
  if (sinks.runlog) *sinks.runlog << RunLog::kHeader << '\n' << std::flush;
  if (sinks.bands) *sinks.bands << kBandHeader << '\n' << std::flush;
  if (sinks.adjacency) *sinks.adjacency << kAdjacencyHeader << '\n' << std::flush;
  if (total == 0) {
    warn("online_run: empty training stream, nothing to learn");
    return log;
  }
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < trainer.config().epochs; ++epoch) {
    for (const StreamSegment& seg : segments) {
      if (!seg.windows) continue;
      trainer.reset_state();
      for (const TrajectoryWindow& w : *seg.windows) {
        const auto start = std::chrono::steady_clock::now();
        StepResult r = trainer.step(w, seg.scene, epoch, step);
        RunRow row;
        row.step = step;
        row.source_window = w.id;
        row.epoch = epoch;
        row.loss = r.loss;
        row.ade = r.ade;
        row.fde = r.fde;
        row.proposal = r.proposal ? static_cast<std::int64_t>(*r.proposal) : -1;
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        log.rows.push_back(row);
        if (sinks.runlog) {
          RunLog::write_row(*sinks.runlog, row);
          sinks.runlog->flush();
        }
        if (r.band && sinks.bands) {
          write_band_rows(*sinks.bands, static_cast<std::int64_t>(step), *r.band);
          sinks.bands->flush();
        }
        if (r.band && sinks.adjacency && step % std::max<std::size_t>(sinks.adjacency_every, 1) == 0) {
          write_adjacency_rows(*sinks.adjacency, static_cast<std::int64_t>(step), *r.band);
          sinks.adjacency->flush();
        }
        ++step;
      }
    }
  }
  return log;
}

inline RunLog online_run(const std::vector<TrajectoryWindow>& windows, const SceneMap* scene,
                         Trainer& trainer, const RunSinks& sinks = {}) {
  const StreamSegment seg{&windows, scene};
  return online_run(std::span<const StreamSegment>(&seg, 1), trainer, sinks);
}

}  // namespace strgg
