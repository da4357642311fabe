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
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "strgg/data/trajectory.hpp"
#include "strgg/numerics/dense.hpp"

namespace strgg {

/// Grayscale occupancy grid with cells in [0, 1].
struct SceneMap {
  Dense2D cells;

  std::size_t height() const noexcept { return cells.rows(); }
  std::size_t width() const noexcept { return cells.cols(); }
};

inline constexpr std::size_t kGridSide = 8;

/// Binary 8x8 mask of active neighborhoods.
class GridMask {
 public:
  GridMask() : cells_(Dense2D::ones(kGridSide, kGridSide)) {}
  explicit GridMask(Dense2D cells) : cells_(std::move(cells)) {
    if (cells_.rows() != kGridSide || cells_.cols() != kGridSide) {
      throw DimensionError("grid mask must be 8x8, got " + cells_.shape());
    }
    bool any = false;
    for (double v : cells_.values()) {
      if (v != 0.0 && v != 1.0) throw DomainError("grid mask entries must be 0 or 1");
      any = any || v == 1.0;
    }
    if (!any) throw DomainError("grid mask has no active cell");
  }

  const Dense2D& cells() const noexcept { return cells_; }

 private:
  Dense2D cells_;
};

namespace detail {

inline SceneMap read_pgm(std::istream& in, const std::string& path) {
  std::string magic;
  in >> magic;
  // Header tokens, skipping '#' comments.
  auto next_int = [&](const char* what) {
    for (;;) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      long v = -1;
      if (!(in >> v) || v <= 0) throw FormatError(path + ": bad PGM " + what);
      return static_cast<std::size_t>(v);
    }
  };
  const std::size_t w = next_int("width");
  const std::size_t h = next_int("height");
  const std::size_t maxval = next_int("maxval");
  if (maxval > 65535) throw FormatError(path + ": PGM maxval out of range");

  Dense2D cells(h, w);
  if (magic == "P2") {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      long v = -1;
      if (!(in >> v) || v < 0 || static_cast<std::size_t>(v) > maxval) {
        throw FormatError(concat(path, ": bad PGM pixel ", k));
      }
      cells[k] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  } else {
    in.get();  // single whitespace after maxval
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(cells.size() * bytes);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      throw FormatError(path + ": truncated PGM raster");
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const unsigned v = bytes == 1 ? raw[k] : (unsigned{raw[2 * k]} << 8) | raw[2 * k + 1];
      if (v > maxval) throw FormatError(concat(path, ": bad PGM pixel ", k));
      cells[k] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  }
  return SceneMap{std::move(cells)};
}

inline SceneMap read_csv_grid(std::istream& in, const std::string& path) {
  std::vector<double> vals;
  std::size_t cols = 0, rows = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::size_t n = 0;
    for (std::string tok; ss >> tok; ++n) {
      double v = 0.0;
      if (!parse_double(tok, v)) throw FormatError(concat(path, ":", lineno, ": bad number"));
      vals.push_back(v);
    }
    if (n == 0) continue;
    if (cols == 0) cols = n;
    if (n != cols) {
      throw FormatError(concat(path, ":", lineno, ": ", n, " columns, expected ", cols));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path + ": empty scene grid");
  Dense2D cells(rows, cols, std::move(vals));

  // Values already in [0, 1] are taken as-is; otherwise rescale.
  const auto [lo_it, hi_it] = std::minmax_element(cells.values().begin(), cells.values().end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo < 0.0 || hi > 1.0) {
    const double base = lo < 0.0 ? lo : 0.0;
    const double range = hi - base;
    for (double& v : cells.values()) v = range > 0.0 ? (v - base) / range : 0.0;
  }
  return SceneMap{std::move(cells)};
}

}  // namespace detail

/// PGM (P2 or P5) or a numeric CSV grid. PGM is divided by maxval; CSV values
/// outside [0, 1] are min-max rescaled (with the floor pinned at 0 when
/// nonnegative).
inline SceneMap load_scene_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scene map '" + path + "'");
  char head[2] = {};
  in.read(head, 2);
  in.clear();
  in.seekg(0);
  if (head[0] == 'P' && (head[1] == '2' || head[1] == '5')) return detail::read_pgm(in, path);
  return detail::read_csv_grid(in, path);
}

}  // namespace strgg
