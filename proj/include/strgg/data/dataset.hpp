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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "strgg/data/scene.hpp"
#include "strgg/data/trajectory.hpp"
#include "strgg/io/config.hpp"
#include "strgg/log.hpp"

namespace strgg {

/// One named trajectory set as listed in a dataset manifest.
struct DatasetEntry {
  std::string name;
  std::string path;
  std::optional<std::string> map_path;
  double frame_interval = 0.4;  // seconds
};

/// Reads `sets = a, b, ...` and per-set `set.<name>.path`,
/// `set.<name>.map`, `set.<name>.frame_interval` keys. A global
/// `frame_interval` supplies the default.
inline std::vector<DatasetEntry> read_manifest(const KeyValueConfig& cfg) {
  const double interval = cfg.get_double("frame_interval", 0.4);
  std::vector<DatasetEntry> out;
  for (const std::string& name : cfg.get_list("sets")) {
    DatasetEntry e;
    e.name = name;
    e.path = cfg.resolve_path(cfg.require_string("set." + name + ".path"));
    if (auto m = cfg.find("set." + name + ".map"); m && !m->empty()) {
      e.map_path = cfg.resolve_path(*m);
    }
    e.frame_interval = cfg.get_double("set." + name + ".frame_interval", interval);
    if (!(e.frame_interval > 0.0)) {
      throw UsageError("set '" + name + "': frame_interval must be positive");
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw UsageError("config: 'sets' lists no datasets");
  return out;
}

/// Windows of one set plus its optional scene map.
struct WindowSet {
  std::string name;
  std::vector<TrajectoryWindow> windows;
  std::optional<SceneMap> scene;
  double frame_interval = 0.4;

  /// True when every window carries vislets (and there is at least one).
  bool has_vislets() const {
    return !windows.empty() &&
           std::all_of(windows.begin(), windows.end(),
                       [](const TrajectoryWindow& w) { return w.has_vislets(); });
  }
};

inline WindowSet load_window_set(const DatasetEntry& e, std::size_t obs, std::size_t pred,
                                 std::size_t stride) {
  WindowSet ws;
  ws.name = e.name;
  ws.frame_interval = e.frame_interval;
  ws.windows = build_windows(load_trajectories(e.path), obs, pred, stride);
  if (e.map_path) ws.scene = load_scene_map(*e.map_path);
  return ws;
}

template <typename T>
struct LeaveOneOut {
  std::vector<std::pair<std::string, T>> train;
  std::pair<std::string, T> test;
};

/// Holds out `held_out`; the rest stay in their original order.
template <typename T>
LeaveOneOut<T> leave_one_out_splits(const std::vector<std::pair<std::string, T>>& named_sets,
                                    const std::string& held_out) {
  LeaveOneOut<T> split;
  bool found = false;
  for (const auto& entry : named_sets) {
    if (entry.first == held_out && !found) {
      split.test = entry;
      found = true;
    } else {
      split.train.push_back(entry);
    }
  }
  if (!found) {
    std::string names;
    for (const auto& e : named_sets) names += (names.empty() ? "" : ", ") + e.first;
    throw UsageError("unknown held-out set '" + held_out + "' (have: " + names + ")");
  }
  if (split.train.empty()) warn("leave-one-out: holding out '" + held_out + "' leaves no training set");
  return split;
}

}  // namespace strgg
