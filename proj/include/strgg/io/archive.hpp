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

// Text archive of trajectory windows:
//
//   strgg-windows 1
//   count <windows>
//   window <id> <first_frame> <obs> <pred> <peds> <has_vislets>
//   ped <id> then obs lines "x y", pred lines "x y present", and with
//   vislets obs lines "v0 v1"
//
// Doubles are written with 17 significant digits, so a read restores the
// windows exactly.

#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "strgg/data/trajectory.hpp"

namespace strgg {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

inline std::string windows_archive_text(const std::vector<TrajectoryWindow>& windows) {
  std::ostringstream o;
  o.precision(17);
  o << "strgg-windows 1\ncount " << windows.size() << '\n';
  for (const TrajectoryWindow& w : windows) {
    o << "window " << w.id << ' ' << w.first_frame << ' ' << w.obs << ' ' << w.pred << ' ' << w.size() << ' '
      << (w.has_vislets() ? 1 : 0) << '\n';
    for (std::size_t k = 0; k < w.size(); ++k) {
      o << "ped " << w.ped_ids[k] << '\n';
      for (std::size_t t = 0; t < w.obs; ++t) o << w.observed[k](t, 0) << ' ' << w.observed[k](t, 1) << '\n';
      for (std::size_t t = 0; t < w.pred; ++t)
        o << w.future[k](t, 0) << ' ' << w.future[k](t, 1) << ' ' << (w.presence[k][t] ? 1 : 0) << '\n';
      if (w.has_vislets())
        for (std::size_t t = 0; t < w.obs; ++t) o << (*w.vislets)[k](t, 0) << ' ' << (*w.vislets)[k](t, 1) << '\n';
    }
  }
  return o.str();
}

/// Writes the archive and returns its checksum.
inline std::uint64_t write_windows_archive(const std::string& path, const std::vector<TrajectoryWindow>& windows) {
  const std::string text = windows_archive_text(windows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write window archive '" + path + "'");
  out << text;
  if (!out.flush()) throw IoError("write failure on '" + path + "'");
  return fnv1a(text);
}

inline std::vector<TrajectoryWindow> parse_windows_archive(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  auto fail = [&](const std::string& what) -> FormatError { return FormatError(origin + ": " + what); };
  std::string tag;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> tag >> version) || tag != "strgg-windows" || version != 1) throw fail("not a version-1 window archive");
  if (!(in >> tag >> count) || tag != "count") throw fail("missing window count");
  std::vector<TrajectoryWindow> out(count);
  for (TrajectoryWindow& w : out) {
    std::size_t peds = 0;
    int vis = 0;
    if (!(in >> tag >> w.id >> w.first_frame >> w.obs >> w.pred >> peds >> vis) || tag != "window") {
      throw fail(detail::concat("bad window header after ", &w - out.data(), " windows"));
    }
    if (vis) w.vislets.emplace();
    for (std::size_t k = 0; k < peds; ++k) {
      std::int64_t id = 0;
      if (!(in >> tag >> id) || tag != "ped") throw fail(detail::concat("window ", w.id, ": bad pedestrian record"));
      w.ped_ids.push_back(id);
      Dense2D obs(w.obs, 2), fut(w.pred, 2);
      std::vector<bool> present(w.pred);
      for (std::size_t t = 0; t < w.obs; ++t)
        if (!(in >> obs(t, 0) >> obs(t, 1))) throw fail(detail::concat("window ", w.id, ": truncated"));
      for (std::size_t t = 0; t < w.pred; ++t) {
        int p = 0;
        if (!(in >> fut(t, 0) >> fut(t, 1) >> p)) throw fail(detail::concat("window ", w.id, ": truncated"));
        present[t] = p != 0;
      }
      w.observed.push_back(std::move(obs));
      w.future.push_back(std::move(fut));
      w.presence.push_back(std::move(present));
      if (vis) {
        Dense2D v(w.obs, 2);
        for (std::size_t t = 0; t < w.obs; ++t)
          if (!(in >> v(t, 0) >> v(t, 1))) throw fail(detail::concat("window ", w.id, ": truncated"));
        w.vislets->push_back(std::move(v));
      }
    }
  }
  if (in >> tag) throw fail("trailing content");
  return out;
}

inline std::vector<TrajectoryWindow> read_windows_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open window archive '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_windows_archive(ss.str(), path);
}

}  // namespace strgg
