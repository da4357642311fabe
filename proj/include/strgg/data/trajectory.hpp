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
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "strgg/log.hpp"
#include "strgg/numerics/dense.hpp"

namespace strgg {

inline constexpr std::size_t kMaxPedestrians = 20;

struct FrameRecord {
  std::int64_t frame_id = 0;
  std::int64_t ped_id = 0;
  double x = 0.0;  // meters
  double y = 0.0;
  std::optional<std::array<double, 2>> vislet;  // radians

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

/// Accepts "10" and "10.0"; rejects fractional ids.
inline bool parse_id(const std::string& tok, std::int64_t& out) {
  double d = 0.0;
  if (!parse_double(tok, d) || d != std::floor(d) || std::abs(d) > 9.0e15) return false;
  out = static_cast<std::int64_t>(d);
  return true;
}

}  // namespace detail

/// Reads whitespace-separated (frame, ped, x, y[, vx, vy]) rows. Blank lines
/// and '#' comments are skipped. Output is sorted by (frame, ped).
inline std::vector<FrameRecord> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file '" + path + "'");

  std::vector<FrameRecord> out;
  std::size_t width = 0;
  std::size_t first_line = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    const std::string where = detail::concat(path, ":", lineno);
    if (tok.size() != 4 && tok.size() != 6) {
      throw FormatError(detail::concat(where, ": expected 4 or 6 columns, got ", tok.size()));
    }
    if (width == 0) {
      width = tok.size();
      first_line = lineno;
    } else if (tok.size() != width) {
      throw FormatError(detail::concat(where, ": ", tok.size(), " columns but line ", first_line,
                                       " has ", width));
    }
    FrameRecord r;
    double v[4] = {};
    bool ok = detail::parse_id(tok[0], r.frame_id) && detail::parse_id(tok[1], r.ped_id) &&
              detail::parse_double(tok[2], r.x) && detail::parse_double(tok[3], r.y);
    if (ok && width == 6) {
      ok = detail::parse_double(tok[4], v[0]) && detail::parse_double(tok[5], v[1]);
      r.vislet = std::array<double, 2>{v[0], v[1]};
    }
    if (!ok) throw FormatError(where + ": malformed numeric field");
    out.push_back(r);
  }
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  if (out.empty()) warn("no trajectory records in '" + path + "'");

  std::stable_sort(out.begin(), out.end(), [](const FrameRecord& a, const FrameRecord& b) {
    return std::tie(a.frame_id, a.ped_id) < std::tie(b.frame_id, b.ped_id);
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].frame_id == out[i - 1].frame_id && out[i].ped_id == out[i - 1].ped_id) {
      throw FormatError(detail::concat(path, ": duplicate (frame ", out[i].frame_id, ", ped ",
                                       out[i].ped_id, ")"));
    }
  }
  return out;
}

/// Writes records so that load_trajectories() restores them exactly.
inline void write_trajectories(const std::string& path, const std::vector<FrameRecord>& recs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory file '" + path + "'");
  out.precision(17);
  for (const FrameRecord& r : recs) {
    out << r.frame_id << '\t' << r.ped_id << '\t' << r.x << '\t' << r.y;
    if (r.vislet) out << '\t' << (*r.vislet)[0] << '\t' << (*r.vislet)[1];
    out << '\n';
  }
  if (!out) throw IoError("write failure on '" + path + "'");
}

/// One observation/prediction slice. Pedestrian k's rows are observed[k]
/// ([obs x 2]), future[k] ([pred x 2], zero where masked) and optionally
/// vislets[k] ([obs x 2]).
struct TrajectoryWindow {
  std::int64_t id = 0;
  std::int64_t first_frame = 0;
  std::size_t obs = 0;
  std::size_t pred = 0;
  std::vector<std::int64_t> ped_ids;
  std::vector<Dense2D> observed;
  std::vector<Dense2D> future;
  std::optional<std::vector<Dense2D>> vislets;
  std::vector<std::vector<bool>> presence;  // [ped][future step]

  std::size_t size() const noexcept { return ped_ids.size(); }
  bool has_vislets() const noexcept { return vislets.has_value(); }
  std::size_t present_steps() const {
    std::size_t n = 0;
    for (const auto& p : presence) n += static_cast<std::size_t>(std::count(p.begin(), p.end(), true));
    return n;
  }

  friend bool operator==(const TrajectoryWindow&, const TrajectoryWindow&) = default;
};

/// Sliding windows over the sorted distinct frames. Pedestrians missing from
/// any observed frame are dropped; absent future steps are masked. With more
/// than `max_peds` eligible pedestrians, the ones with most future presence
/// are kept (ties to the lower id). Windows with no eligible pedestrian, or
/// no future ground truth at all, are skipped.
inline std::vector<TrajectoryWindow> build_windows(const std::vector<FrameRecord>& records,
                                                   std::size_t obs, std::size_t pred,
                                                   std::size_t stride,
                                                   std::size_t max_peds = kMaxPedestrians) {
  if (obs < 1 || pred < 1 || stride < 1 || max_peds < 1) {
    throw UsageError(detail::concat("build_windows: obs=", obs, " pred=", pred, " stride=",
                                    stride, " max_peds=", max_peds, " must all be >= 1"));
  }
  std::vector<std::int64_t> frames;
  std::map<std::pair<std::int64_t, std::int64_t>, const FrameRecord*> at;
  for (const FrameRecord& r : records) {
    frames.push_back(r.frame_id);
    at[{r.frame_id, r.ped_id}] = &r;
  }
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

  std::map<std::int64_t, std::set<std::int64_t>> peds_at;
  for (const FrameRecord& r : records) peds_at[r.frame_id].insert(r.ped_id);

  std::vector<TrajectoryWindow> out;
  const std::size_t span = obs + pred;
  for (std::size_t s = 0; s + span <= frames.size(); s += stride) {
    // Eligible: present in every observed frame.
    std::set<std::int64_t> eligible = peds_at[frames[s]];
    for (std::size_t t = 1; t < obs && !eligible.empty(); ++t) {
      const auto& here = peds_at[frames[s + t]];
      std::set<std::int64_t> keep;
      std::set_intersection(eligible.begin(), eligible.end(), here.begin(), here.end(),
                            std::inserter(keep, keep.end()));
      eligible.swap(keep);
    }
    if (eligible.empty()) continue;

    std::vector<std::pair<std::size_t, std::int64_t>> ranked;
    for (std::int64_t p : eligible) {
      std::size_t n = 0;
      for (std::size_t t = 0; t < pred; ++t) n += at.count({frames[s + obs + t], p});
      ranked.emplace_back(n, p);
    }
    if (ranked.size() > max_peds) {
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      ranked.resize(max_peds);
      std::sort(ranked.begin(), ranked.end(),
                [](const auto& a, const auto& b) { return a.second < b.second; });
    }

    TrajectoryWindow w;
    w.first_frame = frames[s];
    w.obs = obs;
    w.pred = pred;
    bool all_vislets = true;
    for (const auto& [count, p] : ranked) {
      (void)count;
      Dense2D o(obs, 2), f(pred, 2), v(obs, 2);
      for (std::size_t t = 0; t < obs; ++t) {
        const FrameRecord& r = *at.at({frames[s + t], p});
        o(t, 0) = r.x;
        o(t, 1) = r.y;
        if (r.vislet) {
          v(t, 0) = (*r.vislet)[0];
          v(t, 1) = (*r.vislet)[1];
        } else {
          all_vislets = false;
        }
      }
      std::vector<bool> mask(pred, false);
      for (std::size_t t = 0; t < pred; ++t) {
        auto it = at.find({frames[s + obs + t], p});
        if (it == at.end()) continue;
        mask[t] = true;
        f(t, 0) = it->second->x;
        f(t, 1) = it->second->y;
      }
      w.ped_ids.push_back(p);
      w.observed.push_back(std::move(o));
      w.future.push_back(std::move(f));
      w.presence.push_back(std::move(mask));
      if (!w.vislets) w.vislets.emplace();
      w.vislets->push_back(std::move(v));
    }
    if (!all_vislets) w.vislets.reset();
    if (w.present_steps() == 0) continue;  // nothing to score
    w.id = static_cast<std::int64_t>(out.size());
    out.push_back(std::move(w));
  }
  if (out.empty()) {
    warn(detail::concat("no complete window (obs=", obs, ", pred=", pred, ") in ",
                        frames.size(), " frames"));
  }
  return out;
}

}  // namespace strgg
