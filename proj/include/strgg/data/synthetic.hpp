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

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "strgg/data/scene.hpp"
#include "strgg/data/trajectory.hpp"
#include "strgg/numerics/rng.hpp"

namespace strgg {

/// Episodes of constant-velocity walkers. Each episode owns `frames`
/// consecutive frame ids and fresh pedestrian ids.
struct SyntheticSceneConfig {
  std::size_t episodes = 50;
  std::size_t pedestrians = 5;
  std::size_t frames = 20;
  double frame_interval = 0.4;  // seconds
  double min_speed = 0.5;       // m/s
  double max_speed = 1.5;
  double extent = 10.0;  // start positions in [0, extent]^2
  bool vislets = false;  // heading and a zero second component
  std::uint64_t seed = 1;
};

inline std::vector<FrameRecord> synthetic_records(const SyntheticSceneConfig& c) {
  Rng rng(c.seed);
  std::vector<FrameRecord> out;
  out.reserve(c.episodes * c.pedestrians * c.frames);
  for (std::size_t e = 0; e < c.episodes; ++e) {
    for (std::size_t k = 0; k < c.pedestrians; ++k) {
      const double x0 = rng.uniform(0.0, c.extent), y0 = rng.uniform(0.0, c.extent);
      const double speed = rng.uniform(c.min_speed, c.max_speed);
      const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double vx = speed * std::cos(heading), vy = speed * std::sin(heading);
      const auto ped = static_cast<std::int64_t>(e * c.pedestrians + k);
      for (std::size_t t = 0; t < c.frames; ++t) {
        FrameRecord r;
        r.frame_id = static_cast<std::int64_t>(e * c.frames + t);
        r.ped_id = ped;
        const double dt = static_cast<double>(t) * c.frame_interval;
        r.x = x0 + vx * dt;
        r.y = y0 + vy * dt;
        if (c.vislets) r.vislet = std::array<double, 2>{heading, 0.0};
        out.push_back(r);
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const FrameRecord& a, const FrameRecord& b) {
    return a.frame_id != b.frame_id ? a.frame_id < b.frame_id : a.ped_id < b.ped_id;
  });
  return out;
}

/// Smooth occupancy-like map used where a scene image is needed.
inline SceneMap synthetic_scene(std::size_t side = 16) {
  SceneMap s{Dense2D(side, side)};
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j)
      s.cells(i, j) = 0.5 + 0.5 * std::sin(0.4 * static_cast<double>(i)) * std::cos(0.3 * static_cast<double>(j));
  return s;
}

}  // namespace strgg
