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
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "strgg/data/synthetic.hpp"
#include "strgg/eval/metrics.hpp"
#include "strgg/io/config.hpp"
#include "strgg/model/model.hpp"
#include "strgg/train/training.hpp"

namespace strgg {

struct WindowScore {
  std::int64_t window = 0;
  std::size_t pedestrians = 0;
  double ade = 0.0;        // best of the band (or the single path)
  double fde = 0.0;
  double first_ade = 0.0;  // proposal 0
  double first_fde = 0.0;
  std::int64_t proposal = -1;
};

struct MetricReport {
  std::string dataset;
  VariantId variant = VariantId::ST;
  std::size_t proposals = 1;  // P actually used; 1 for deterministic variants
  std::uint64_t seed = 0;
  bool untrained = false;
  double ade = 0.0;  // mean of per-window values
  double fde = 0.0;
  double first_ade = 0.0;
  double first_fde = 0.0;
  std::vector<WindowScore> windows;
};

struct EvalOptions {
  std::size_t proposals = 20;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool untrained = false;
};

/// Scores `windows` in order, carrying hidden state from one window to the
/// next. Recommender variants keep the best of P proposals per window.
/// Proposal seeds nest: the band for P = a is a prefix of the band for
/// P = b > a, so best-of-b never exceeds best-of-a.
inline MetricReport evaluate(const Model& model, const std::string& dataset,
                             const std::vector<TrajectoryWindow>& windows, const SceneMap* scene,
                             const EvalOptions& opt) {
  if (opt.proposals < 1) throw UsageError("evaluate: P must be >= 1");
  if (windows.empty()) throw UsageError("evaluate: no test windows in '" + dataset + "'");
  const bool banded = model.config.spec().recommender &&
                      model.config.policy == AdjacencyPolicy::kStrMinError;
  MetricReport rep;
  rep.dataset = dataset;
  rep.variant = model.config.variant;
  rep.proposals = banded ? opt.proposals : 1;
  rep.seed = opt.seed;
  rep.untrained = opt.untrained;

  ModelState state;
  state.seed = mix_seed(opt.seed, 0x5157);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const TrajectoryWindow& w = windows[k];
    ForwardOptions fo;
    fo.proposals = rep.proposals;
    fo.band_seed = mix_seed(opt.seed, k);
    fo.selection = BandSelection::kBest;
    fo.workers = opt.workers;
    Tape tape;
    ForwardResult r = forward(tape, model, w, scene, state, fo);
    const WindowTensors t = model.tensors(w);

    WindowScore s;
    s.window = w.id;
    s.pedestrians = w.ped_ids.size();
    const Dense2D& best = r.prediction.value();
    s.ade = ade(best, t.truth, t.step_mask);
    s.fde = fde(best, t.truth, t.step_mask);
    if (r.band) {
      s.proposal = static_cast<std::int64_t>(r.selected);
      s.first_ade = ade(r.band->trajectories[0], t.truth, t.step_mask);
      s.first_fde = fde(r.band->trajectories[0], t.truth, t.step_mask);
    } else {
      s.first_ade = s.ade;
      s.first_fde = s.fde;
    }
    rep.windows.push_back(s);
    state = std::move(r.next);
  }
  const double count = static_cast<double>(rep.windows.size());
  for (const WindowScore& s : rep.windows) {
    rep.ade += s.ade / count;
    rep.fde += s.fde / count;
    rep.first_ade += s.first_ade / count;
    rep.first_fde += s.first_fde / count;
  }
  return rep;
}

inline constexpr const char* kMetricsHeader = "dataset,variant,P,rep,ade,fde";
inline constexpr const char* kWindowMetricsHeader = "window,pedestrians,ade,fde,first_ade,first_fde,proposal_idx";

/// One row per repetition, then `mean` and `std` rows (sample standard
/// deviation; 0 for a single repetition).
inline void write_metrics_csv(std::ostream& out, const std::vector<MetricReport>& reps) {
  out << kMetricsHeader << '\n';
  if (reps.empty()) return;
  const auto old = out.precision(17);
  double mean_ade = 0.0, mean_fde = 0.0;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const MetricReport& m = reps[r];
    out << m.dataset << ',' << variant_name(m.variant) << ',' << m.proposals << ',' << r << ','
        << m.ade << ',' << m.fde << '\n';
    mean_ade += m.ade / static_cast<double>(reps.size());
    mean_fde += m.fde / static_cast<double>(reps.size());
  }
  double var_ade = 0.0, var_fde = 0.0;
  if (reps.size() > 1) {
    for (const MetricReport& m : reps) {
      var_ade += (m.ade - mean_ade) * (m.ade - mean_ade);
      var_fde += (m.fde - mean_fde) * (m.fde - mean_fde);
    }
    var_ade /= static_cast<double>(reps.size() - 1);
    var_fde /= static_cast<double>(reps.size() - 1);
  }
  const MetricReport& h = reps.front();
  const std::string head = h.dataset + "," + variant_name(h.variant) + "," + std::to_string(h.proposals);
  out << head << ",mean," << mean_ade << ',' << mean_fde << '\n';
  out << head << ",std," << std::sqrt(var_ade) << ',' << std::sqrt(var_fde) << '\n';
  out.precision(old);
}

inline void write_window_metrics_csv(std::ostream& out, const MetricReport& m) {
  out << kWindowMetricsHeader << '\n';
  const auto old = out.precision(17);
  for (const WindowScore& s : m.windows) {
    out << s.window << ',' << s.pedestrians << ',' << s.ade << ',' << s.fde << ',' << s.first_ade
        << ',' << s.first_fde << ',' << s.proposal << '\n';
  }
  out.precision(old);
}

// ---------------------------------------------------------------------------
// Graph analytics

inline constexpr double kDefaultEdgeThreshold = 1e-6;

struct CardinalityStats {
  double tau = kDefaultEdgeThreshold;
  std::size_t full = 0;  // n^2 of the first adjacency
  std::vector<std::size_t> counts;
  std::vector<double> ratios;  // count / n^2 per proposal
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
  double mean_ratio = 0.0;
};

/// Nearest-rank percentile of an ascending sample: element ceil(p N / 100).
inline double nearest_rank(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw UsageError("nearest_rank: empty sample");
  const auto n = static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p / 100.0 * n)));
  return sorted[std::min(rank, sorted.size()) - 1];
}

/// Counts entries above `tau` in each adjacency.
inline CardinalityStats cardinality_stats(const std::vector<Dense2D>& adjacencies,
                                          double tau = kDefaultEdgeThreshold) {
  if (!(tau >= 0.0 && tau < 1.0)) throw UsageError(detail::concat("cardinality_stats: tau ", tau, " not in [0, 1)"));
  CardinalityStats s;
  s.tau = tau;
  if (adjacencies.empty()) return s;
  s.full = adjacencies.front().size();
  std::vector<double> sorted;
  for (const Dense2D& a : adjacencies) {
    const auto c = static_cast<std::size_t>(std::count_if(a.values().begin(), a.values().end(),
                                                          [&](double v) { return v > tau; }));
    s.counts.push_back(c);
    s.ratios.push_back(static_cast<double>(c) / static_cast<double>(a.size()));
    s.mean_ratio += s.ratios.back() / static_cast<double>(adjacencies.size());
    sorted.push_back(static_cast<double>(c));
  }
  std::sort(sorted.begin(), sorted.end());
  s.p25 = nearest_rank(sorted, 25.0);
  s.median = nearest_rank(sorted, 50.0);
  s.p75 = nearest_rank(sorted, 75.0);
  return s;
}

inline constexpr const char* kCardinalityHeader = "proposal,count,full,ratio";
inline constexpr const char* kCardinalitySummaryHeader = "tau,proposals,full,p25,median,p75,mean_ratio";

inline void write_cardinality_csv(std::ostream& out, const CardinalityStats& s) {
  const auto old = out.precision(17);
  out << kCardinalityHeader << '\n';
  for (std::size_t i = 0; i < s.counts.size(); ++i)
    out << i << ',' << s.counts[i] << ',' << s.full << ',' << s.ratios[i] << '\n';
  out.precision(old);
}

inline void write_cardinality_summary_csv(std::ostream& out, const CardinalityStats& s) {
  const auto old = out.precision(17);
  out << kCardinalitySummaryHeader << '\n'
      << s.tau << ',' << s.counts.size() << ',' << s.full << ',' << s.p25 << ',' << s.median << ','
      << s.p75 << ',' << s.mean_ratio << '\n';
  out.precision(old);
}

struct Histogram {
  std::vector<double> lo, hi;
  std::vector<std::size_t> counts;

  std::size_t total() const {
    std::size_t t = 0;
    for (std::size_t c : counts) t += c;
    return t;
  }
};

/// Weight histogram over every entry of every adjacency, `bins` uniform bins
/// on [0, 1]. The last bin is closed; values outside [0, 1] are clamped.
inline Histogram density_histogram(const std::vector<Dense2D>& adjacencies, std::size_t bins) {
  if (bins < 1) throw UsageError("density_histogram: bins must be >= 1");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) {
    h.lo.push_back(static_cast<double>(b) / static_cast<double>(bins));
    h.hi.push_back(static_cast<double>(b + 1) / static_cast<double>(bins));
  }
  for (const Dense2D& a : adjacencies)
    for (double v : a.values()) {
      const double c = std::clamp(v, 0.0, 1.0);
      const auto b = std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
      ++h.counts[b];
    }
  return h;
}

inline constexpr const char* kHistogramHeader = "bin_lo,bin_hi,count";

inline void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << kHistogramHeader << '\n';
  for (std::size_t b = 0; b < h.counts.size(); ++b) out << h.lo[b] << ',' << h.hi[b] << ',' << h.counts[b] << '\n';
}

// ---------------------------------------------------------------------------
// CSV input for the analytics

/// Numeric table with a header row. Every data row must have the header's
/// width and parse as numbers.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw FormatError("no column '" + name + "'");
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline NumericTable read_numeric_csv(std::istream& in, const std::string& origin) {
  NumericTable t;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw FormatError(detail::concat(origin, ": row ", row, ": ", cells.size(), " fields, header has ",
                                       t.header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!detail::parse_double(cells[c], values[c])) {
        throw FormatError(detail::concat(origin, ": row ", row, ": field '", t.header[c], "' is not a number: '",
                                         cells[c], "'"));
      }
    }
    t.rows.push_back(std::move(values));
  }
  if (t.header.empty()) throw FormatError(origin + ": empty CSV");
  if (t.rows.empty()) throw FormatError(origin + ": CSV has a header but no data rows");
  return t;
}

/// Adjacencies from an adjacency CSV (window,proposal_idx,n,a_00,...).
inline std::vector<Dense2D> read_adjacency_csv(std::istream& in, const std::string& origin) {
  std::vector<Dense2D> out;
  std::string line;
  std::size_t row = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (!header) {
      if (cells.size() < 3 || cells[0] != "window" || cells[1] != "proposal_idx" || cells[2] != "n") {
        throw FormatError(detail::concat(origin, ": row ", row, ": expected header '", kAdjacencyHeader, "'"));
      }
      header = true;
      continue;
    }
    double nd = 0.0;
    if (cells.size() < 3 || !detail::parse_double(cells[2], nd) || nd < 1.0 || nd != std::floor(nd)) {
      throw FormatError(detail::concat(origin, ": row ", row, ": bad size field"));
    }
    const auto n = static_cast<std::size_t>(nd);
    if (cells.size() != 3 + n * n) {
      throw FormatError(detail::concat(origin, ": row ", row, ": ", cells.size() - 3, " values, expected ", n * n));
    }
    Dense2D a(n, n);
    for (std::size_t k = 0; k < n * n; ++k) {
      if (!detail::parse_double(cells[3 + k], a[k]) || !std::isfinite(a[k])) {
        throw FormatError(detail::concat(origin, ": row ", row, ": value ", k, " is not a finite number"));
      }
    }
    out.push_back(std::move(a));
  }
  if (!header) throw FormatError(origin + ": empty CSV");
  if (out.empty()) throw FormatError(origin + ": no adjacency rows");
  return out;
}

// ---------------------------------------------------------------------------
// SVG rendering

namespace detail {

inline constexpr double kSvgWidth = 640, kSvgHeight = 400, kSvgMargin = 50;
inline constexpr const char* kSvgPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void svg_open(std::ostream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth << "\" height=\"" << kSvgHeight
      << "\" viewBox=\"0 0 " << kSvgWidth << ' ' << kSvgHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kSvgWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << svg_escape(title) << "</text>\n"
      << "<line x1=\"" << kSvgMargin << "\" y1=\"" << kSvgHeight - kSvgMargin << "\" x2=\"" << kSvgWidth - kSvgMargin
      << "\" y2=\"" << kSvgHeight - kSvgMargin << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kSvgMargin << "\" y1=\"" << kSvgMargin << "\" x2=\"" << kSvgMargin << "\" y2=\""
      << kSvgHeight - kSvgMargin << "\" stroke=\"black\"/>\n";
}

inline void svg_axis_labels(std::ostream& out, double x0, double x1, double y0, double y1) {
  const double b = kSvgHeight - kSvgMargin;
  out << "<g font-family=\"sans-serif\" font-size=\"10\">\n"
      << "<text x=\"" << kSvgMargin << "\" y=\"" << b + 14 << "\" text-anchor=\"middle\">" << x0 << "</text>\n"
      << "<text x=\"" << kSvgWidth - kSvgMargin << "\" y=\"" << b + 14 << "\" text-anchor=\"middle\">" << x1 << "</text>\n"
      << "<text x=\"" << kSvgMargin - 4 << "\" y=\"" << b << "\" text-anchor=\"end\">" << y0 << "</text>\n"
      << "<text x=\"" << kSvgMargin - 4 << "\" y=\"" << kSvgMargin + 4 << "\" text-anchor=\"end\">" << y1 << "</text>\n"
      << "</g>\n";
}

}  // namespace detail

/// Line plot: column `x` against each of `ys` (all other columns when
/// empty), one polyline per series.
inline void write_line_svg(std::ostream& out, const NumericTable& t, const std::string& x,
                           std::vector<std::string> ys, const std::string& title) {
  if (t.rows.empty()) throw FormatError("line plot: no data rows");
  const std::size_t xc = t.column(x);
  if (ys.empty())
    for (const std::string& h : t.header)
      if (h != x) ys.push_back(h);
  if (ys.empty()) throw FormatError("line plot: no series columns");
  std::vector<std::size_t> yc;
  for (const std::string& y : ys) yc.push_back(t.column(y));

  double x0 = t.rows[0][xc], x1 = x0, y0 = t.rows[0][yc[0]], y1 = y0;
  for (const auto& r : t.rows) {
    x0 = std::min(x0, r[xc]);
    x1 = std::max(x1, r[xc]);
    for (std::size_t c : yc) {
      y0 = std::min(y0, r[c]);
      y1 = std::max(y1, r[c]);
    }
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  using detail::kSvgHeight, detail::kSvgMargin, detail::kSvgWidth;
  auto px = [&](double v) { return kSvgMargin + (v - x0) / (x1 - x0) * (kSvgWidth - 2 * kSvgMargin); };
  auto py = [&](double v) { return kSvgHeight - kSvgMargin - (v - y0) / (y1 - y0) * (kSvgHeight - 2 * kSvgMargin); };

  const auto old = out.precision(6);
  detail::svg_open(out, title);
  detail::svg_axis_labels(out, x0, x1, y0, y1);
  for (std::size_t s = 0; s < yc.size(); ++s) {
    const char* color = detail::kSvgPalette[s % std::size(detail::kSvgPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      out << (i ? " " : "") << px(t.rows[i][xc]) << ',' << py(t.rows[i][yc[s]]);
    out << "\"/>\n"
        << "<text x=\"" << kSvgWidth - kSvgMargin + 4 << "\" y=\"" << kSvgMargin + 14 * s
        << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" << color << "\">" << detail::svg_escape(ys[s])
        << "</text>\n";
  }
  out << "</svg>\n";
  out.precision(old);
}

/// Bar plot of a histogram table (bin_lo, bin_hi, count), one labelled bar
/// per bin.
inline void write_histogram_svg(std::ostream& out, const NumericTable& t, const std::string& title) {
  if (t.rows.empty()) throw FormatError("histogram plot: no bins");
  const std::size_t lo = t.column("bin_lo"), hi = t.column("bin_hi"), cnt = t.column("count");
  double peak = 0.0;
  for (const auto& r : t.rows) peak = std::max(peak, r[cnt]);
  if (peak <= 0.0) peak = 1.0;
  using detail::kSvgHeight, detail::kSvgMargin, detail::kSvgWidth;
  const double slot = (kSvgWidth - 2 * kSvgMargin) / static_cast<double>(t.rows.size());
  const double base = kSvgHeight - kSvgMargin;

  const auto old = out.precision(6);
  detail::svg_open(out, title);
  detail::svg_axis_labels(out, t.rows.front()[lo], t.rows.back()[hi], 0.0, peak);
  for (std::size_t b = 0; b < t.rows.size(); ++b) {
    const double h = t.rows[b][cnt] / peak * (kSvgHeight - 2 * kSvgMargin);
    const double x = kSvgMargin + slot * static_cast<double>(b);
    out << "<rect x=\"" << x + 1 << "\" y=\"" << base - h << "\" width=\"" << std::max(slot - 2, 1.0)
        << "\" height=\"" << h << "\" fill=\"" << detail::kSvgPalette[0] << "\"/>\n"
        << "<text x=\"" << x + slot / 2 << "\" y=\"" << base + 26
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"8\">" << t.rows[b][lo] << "-"
        << t.rows[b][hi] << "</text>\n";
  }
  out << "</svg>\n";
  out.precision(old);
}

/// Renders a CSV as SVG. Histogram tables (bin_lo, bin_hi, count) become
/// bars; anything else is a line plot of the first column against the rest.
inline void emit_plotdata(std::istream& csv, const std::string& origin, std::ostream& svg,
                          const std::string& title) {
  const NumericTable t = read_numeric_csv(csv, origin);
  const bool histogram = std::find(t.header.begin(), t.header.end(), "bin_lo") != t.header.end() &&
                         std::find(t.header.begin(), t.header.end(), "count") != t.header.end();
  if (histogram) {
    write_histogram_svg(svg, t, title);
  } else {
    if (t.header.size() < 2) throw FormatError(origin + ": a line plot needs at least two columns");
    write_line_svg(svg, t, t.header.front(), {}, title);
  }
}

// ---------------------------------------------------------------------------
// Sampling-time benchmark

struct BenchRow {
  std::size_t samples = 0;    // future trajectories per frame
  std::size_t proposals = 0;  // samples / pedestrians
  double median_s = 0.0;
  double per_sample_s = 0.0;
};

struct BenchOptions {
  std::size_t reps = 5;
  std::size_t nmf_iters = 25;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

/// Time to sample `count` future trajectories for one frame of
/// `scene_size` pedestrians: one proposal yields a trajectory per
/// pedestrian, so a count needs count / scene_size proposals. Each count
/// reports the median wall time over the repetitions.
inline std::vector<BenchRow> bench_sampling(const std::vector<std::size_t>& counts, std::size_t scene_size,
                                            const BenchOptions& opt = {}) {
  if (counts.empty()) throw UsageError("bench_sampling: no sample counts");
  if (!std::is_sorted(counts.begin(), counts.end())) throw UsageError("bench_sampling: counts must be ascending");
  if (scene_size < 1 || scene_size > kMaxPedestrians) {
    throw UsageError(detail::concat("bench_sampling: scene size ", scene_size, " not in [1, ", kMaxPedestrians, "]"));
  }
  if (opt.reps < 1) throw UsageError("bench_sampling: reps must be >= 1");
  for (std::size_t c : counts)
    if (c < scene_size) throw UsageError(detail::concat("bench_sampling: count ", c, " is below the scene size"));

  ModelConfig cfg;
  cfg.variant = VariantId::STR;
  cfg.nmf_max_iters = opt.nmf_iters;
  cfg.nmf_tol = 0.0;  // fixed work per proposal
  const Model model = Model::create(cfg, opt.seed);
  SyntheticSceneConfig sc;
  sc.episodes = 1;
  sc.pedestrians = scene_size;
  sc.seed = opt.seed;
  const std::vector<TrajectoryWindow> windows = build_windows(synthetic_records(sc), cfg.obs, cfg.pred, 1);
  if (windows.empty()) throw UsageError("bench_sampling: synthetic scene produced no window");
  ModelState state;
  state.seed = opt.seed;

  std::vector<BenchRow> rows;
  for (std::size_t c : counts) {
    BenchRow row;
    row.samples = c;
    row.proposals = c / scene_size;
    std::vector<double> times;
    for (std::size_t r = 0; r < opt.reps; ++r) {
      ForwardOptions fo;
      fo.proposals = row.proposals;
      fo.band_seed = mix_seed(opt.seed, r);
      fo.workers = opt.workers;
      const auto start = std::chrono::steady_clock::now();
      Tape tape;
      forward(tape, model, windows.front(), nullptr, state, fo);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(times.begin(), times.end());
    row.median_s = times.size() % 2 ? times[times.size() / 2]
                                    : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
    row.per_sample_s = row.median_s / static_cast<double>(c);
    rows.push_back(row);
  }
  return rows;
}

inline constexpr const char* kBenchHeader = "samples,proposals,median_s,per_sample_s";

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  const auto old = out.precision(6);
  out << kBenchHeader << '\n';
  for (const BenchRow& r : rows) out << r.samples << ',' << r.proposals << ',' << r.median_s << ',' << r.per_sample_s << '\n';
  out.precision(old);
}

}  // namespace strgg
