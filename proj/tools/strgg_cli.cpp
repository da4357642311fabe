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

// strgg command line: ingest, train, eval, analyze, bench, rerun.
//
// Exit codes: 0 ok, 2 I/O, 3 usage or bad input, 4 numerical failure.
// Every failure prints one line to stderr:
//   strgg: error: kind=<kind> code=<exit code> message=<text>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "strgg/strgg.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace strgg::cli {
namespace {

enum ExitCode { kOk = 0, kIo = 2, kUsage = 3, kNumerical = 4 };

int exit_code_for(const Error& e) {
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
  return kUsage;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

void report_error(const std::string& kind, int code, const std::string& message) {
  std::cerr << "strgg: error: kind=" << kind << " code=" << code << " message=" << one_line(message) << std::endl;
}

// ---------------------------------------------------------------------------
// Files

fs::path make_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory '" + out + "'");
  return fs::path(out);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  return f;
}

void close_out(std::ofstream& f, const fs::path& p) {
  f.flush();
  if (!f) throw IoError("write failure on '" + p.string() + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_digest(const std::string& path) { return hex64(fnv1a(read_file(path))); }

// ---------------------------------------------------------------------------
// Run manifest: written when a run starts, finalized when it ends.

class RunManifest {
 public:
  RunManifest(fs::path dir, const std::string& command, const std::vector<std::string>& argv)
      : path_(std::move(dir) / "manifest.json"), start_(std::chrono::steady_clock::now()) {
    doc_["tool"] = "strgg";
    doc_["version"] = kVersion;
    doc_["command"] = command;
    doc_["argv"] = argv;
    doc_["cwd"] = fs::current_path().string();
    doc_["status"] = "running";
  }

  Json& operator[](const char* key) { return doc_[key]; }

  void output(const std::string& name, const fs::path& p) { doc_["outputs"][name] = p.filename().string(); }
  void input(const std::string& path) { doc_["inputs"][path] = file_digest(path); }

  void write() {
    std::ofstream f = open_out(path_);
    f << doc_.dump(2) << '\n';
    close_out(f, path_);
  }

  void finish() {
    doc_["status"] = "complete";
    doc_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write();
  }

  void fail(const std::string& kind, const std::string& message) {
    doc_["status"] = "failed";
    doc_["error"] = {{"kind", kind}, {"message", one_line(message)}};
    doc_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    try {
      write();
    } catch (const Error&) {
    }
  }

 private:
  fs::path path_;
  std::chrono::steady_clock::time_point start_;
  Json doc_;
};

/// Marks the manifest failed when a command throws.
template <typename Fn>
void guarded(RunManifest& m, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    m.fail(e.kind(), e.what());
    throw;
  }
  m.finish();
}

// ---------------------------------------------------------------------------
// Shared settings

/// What a rerun checks before repeating a command.
struct Expectations {
  std::optional<Json> config;
  std::optional<Json> inputs;
};

struct Context {
  std::size_t workers = 1;
  std::vector<std::string> argv;  // without the program name
  Expectations expect;
};

std::size_t size_key(const KeyValueConfig& cfg, const std::string& key, std::size_t fallback) {
  const long long v = cfg.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw UsageError(detail::concat("config: '", key, "' must be >= 0, got ", v));
  return static_cast<std::size_t>(v);
}

ModelConfig model_config_from(const KeyValueConfig& cfg, VariantId variant) {
  ModelConfig m;
  m.variant = variant;
  m.max_peds = size_key(cfg, "max_peds", m.max_peds);
  m.obs = size_key(cfg, "obs", m.obs);
  m.pred = size_key(cfg, "pred", m.pred);
  m.hidden = size_key(cfg, "model.hidden", m.hidden);
  m.out = size_key(cfg, "model.out", m.out);
  m.dec_hidden = size_key(cfg, "model.dec_hidden", m.dec_hidden);
  m.input_scale = cfg.get_double("model.input_scale", m.input_scale);
  m.gaussian_h_o = cfg.get_bool("model.gaussian_h_o", m.gaussian_h_o);
  if (auto d = cfg.find("model.decode")) m.decode = parse_decode_mode(*d);
  if (auto p = cfg.find("model.policy")) m.policy = parse_policy(*p);
  m.nmf_rank = size_key(cfg, "model.nmf_rank", m.nmf_rank);
  m.nmf_max_iters = size_key(cfg, "model.nmf_max_iters", m.nmf_max_iters);
  m.nmf_tol = cfg.get_double("model.nmf_tol", m.nmf_tol);
  m.validate();
  return m;
}

Json config_json(const KeyValueConfig& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : cfg.snapshot()) j[k] = v;
  return j;
}

/// Loads the config and, under rerun, checks it still matches the manifest.
KeyValueConfig load_config(const std::string& path, const Context& ctx) {
  KeyValueConfig cfg = KeyValueConfig::load(path);
  if (ctx.expect.config && *ctx.expect.config != config_json(cfg)) {
    throw UsageError("config '" + path + "' (with environment overrides) differs from the manifest snapshot");
  }
  return cfg;
}

void record_inputs(RunManifest& m, const std::vector<std::string>& paths, const Context& ctx) {
  for (const std::string& p : paths) m.input(p);
  if (ctx.expect.inputs) {
    for (const std::string& p : paths) {
      const Json& want = *ctx.expect.inputs;
      if (!want.contains(p) || want[p] != file_digest(p)) {
        throw UsageError("input '" + p + "' changed since the manifest was written");
      }
    }
  }
}

std::vector<std::pair<std::string, DatasetEntry>> named_entries(const KeyValueConfig& cfg) {
  std::vector<std::pair<std::string, DatasetEntry>> named;
  for (DatasetEntry& e : read_manifest(cfg)) named.emplace_back(e.name, std::move(e));
  return named;
}

std::vector<std::string> entry_paths(const DatasetEntry& e) {
  std::vector<std::string> p{e.path};
  if (e.map_path) p.push_back(*e.map_path);
  return p;
}

std::string held_out_name(const std::optional<std::string>& flag, const KeyValueConfig& cfg) {
  if (flag) return *flag;
  if (auto h = cfg.find("hold_out")) return *h;
  throw UsageError("no held-out set: pass --hold-out or set 'hold_out' in the config");
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string data, map, out;
  std::size_t obs = 8, pred = 12, stride = 1;
};

int cmd_ingest(const IngestArgs& a, const Context& ctx) {
  const fs::path dir = make_out_dir(a.out);
  RunManifest m(dir, "ingest", ctx.argv);
  m["params"] = {{"obs", a.obs}, {"pred", a.pred}, {"stride", a.stride}};
  m.write();
  guarded(m, [&] {
    std::vector<std::string> inputs{a.data};
    if (!a.map.empty()) inputs.push_back(a.map);
    record_inputs(m, inputs, ctx);
    const std::vector<FrameRecord> records = load_trajectories(a.data);
    const std::vector<TrajectoryWindow> windows = build_windows(records, a.obs, a.pred, a.stride);
    std::optional<SceneMap> scene;
    if (!a.map.empty()) scene = load_scene_map(a.map);

    const fs::path archive = dir / "windows.txt";
    const std::uint64_t sum = write_windows_archive(archive.string(), windows);
    std::set<std::int64_t> peds;
    for (const FrameRecord& r : records) peds.insert(r.ped_id);
    const bool vislets = !windows.empty() && std::all_of(windows.begin(), windows.end(),
                                                         [](const TrajectoryWindow& w) { return w.has_vislets(); });
    Json summary = {{"records", records.size()},
                    {"pedestrians", peds.size()},
                    {"windows", windows.size()},
                    {"vislets", vislets},
                    {"checksum", hex64(sum)}};
    if (scene) summary["map"] = {{"rows", scene->cells.rows()}, {"cols", scene->cells.cols()}};
    const fs::path summary_path = dir / "summary.json";
    std::ofstream f = open_out(summary_path);
    f << summary.dump(2) << '\n';
    close_out(f, summary_path);
    m.output("windows", archive);
    m.output("summary", summary_path);
    m["summary"] = summary;
    std::cout << "windows=" << windows.size() << " pedestrians=" << peds.size() << " checksum=" << hex64(sum)
              << '\n';
  });
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config, out;
  std::optional<std::string> variant, hold_out, optimizer;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, proposals;
  std::optional<double> lr, decay, keep;
  std::size_t adjacency_every = 1;
};

int cmd_train(const TrainArgs& a, const Context& ctx) {
  const fs::path dir = make_out_dir(a.out);
  RunManifest m(dir, "train", ctx.argv);
  m.write();
  guarded(m, [&] {
    const KeyValueConfig cfg = load_config(a.config, ctx);
    m["config"] = config_json(cfg);
    const VariantId variant = parse_variant(a.variant.value_or(cfg.get_string("variant", "st")));
    const std::uint64_t seed = a.seed.value_or(static_cast<std::uint64_t>(cfg.get_int("train.seed", 1)));
    const ModelConfig mc = model_config_from(cfg, variant);

    TrainerConfig tc;
    tc.variant = variant;
    tc.obs = mc.obs;
    tc.pred = mc.pred;
    tc.max_size = mc.max_peds;
    tc.seed = seed;
    tc.workers = ctx.workers;
    tc.lr = a.lr.value_or(cfg.get_double("train.lr", tc.lr));
    tc.decay = a.decay.value_or(cfg.get_double("train.decay", tc.decay));
    tc.dropout_keep = a.keep.value_or(cfg.get_double("train.keep", tc.dropout_keep));
    tc.epochs = a.epochs.value_or(size_key(cfg, "train.epochs", tc.epochs));
    tc.proposals = a.proposals.value_or(size_key(cfg, "train.proposals", tc.proposals));
    tc.optimizer = parse_optimizer(a.optimizer.value_or(cfg.get_string("train.optimizer", "adam")));
    tc.validate();
    if (a.adjacency_every < 1) throw UsageError("--adjacency-every must be >= 1");

    const std::string held_out = held_out_name(a.hold_out, cfg);
    const auto split = leave_one_out_splits(named_entries(cfg), held_out);
    const std::size_t stride = size_key(cfg, "stride", 1);

    std::vector<std::string> inputs;
    for (const auto& [name, e] : split.train)
      for (const std::string& p : entry_paths(e)) inputs.push_back(p);
    record_inputs(m, inputs, ctx);

    std::vector<WindowSet> sets;
    std::size_t total = 0;
    for (const auto& [name, e] : split.train) {
      sets.push_back(load_window_set(e, mc.obs, mc.pred, stride));
      const WindowSet& ws = sets.back();
      if (ws.windows.empty()) {
        warn("training set '" + name + "' yields no windows");
        continue;
      }
      require_inputs(variant, ws.has_vislets(), ws.scene.has_value(), "training set '" + name + "'");
      total += ws.windows.size();
    }
    Json train_names = Json::array();
    for (const auto& [name, e] : split.train) train_names.push_back(name);
    m["seed"] = seed;
    m["variant"] = variant_name(variant);
    m["split"] = {{"train", train_names}, {"held_out", held_out}};
    m["trainer"] = {{"lr", tc.lr},           {"decay", tc.decay},   {"keep", tc.dropout_keep},
                    {"epochs", tc.epochs},   {"P", tc.proposals},   {"optimizer", a.optimizer.value_or(cfg.get_string("train.optimizer", "adam"))},
                    {"windows", total}};
    m.write();

    Model model = Model::create(mc, seed);
    Trainer trainer(model, tc);
    std::vector<StreamSegment> segments;
    for (const WindowSet& ws : sets)
      if (!ws.windows.empty()) segments.push_back({&ws.windows, ws.scene ? &*ws.scene : nullptr});

    const fs::path runlog_path = dir / "runlog.csv";
    std::ofstream runlog = open_out(runlog_path);
    std::ofstream bands, adjacency;
    RunSinks sinks;
    sinks.runlog = &runlog;
    const bool banded = mc.spec().recommender && mc.policy == AdjacencyPolicy::kStrMinError;
    if (banded) {
      bands = open_out(dir / "bands.csv");
      adjacency = open_out(dir / "adjacency.csv");
      sinks.bands = &bands;
      sinks.adjacency = &adjacency;
      sinks.adjacency_every = a.adjacency_every;
    }
    const RunLog log = online_run(segments, trainer, sinks);
    close_out(runlog, runlog_path);
    m.output("runlog", runlog_path);
    if (banded) {
      close_out(bands, dir / "bands.csv");
      close_out(adjacency, dir / "adjacency.csv");
      m.output("bands", dir / "bands.csv");
      m.output("adjacency", dir / "adjacency.csv");
    }

    const fs::path ckpt = dir / "checkpoint.bin";
    save_checkpoint(ckpt.string(), model);
    m.output("checkpoint", ckpt);
    double last_loss = log.rows.empty() ? 0.0 : log.rows.back().loss;
    m["result"] = {{"steps", log.rows.size()}, {"final_loss", last_loss}};
    std::cout << "trained " << variant_name(variant) << " on " << total << " windows x " << tc.epochs
              << " epochs; steps=" << log.rows.size() << " final_loss=" << last_loss << '\n';
  });
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string config, out;
  std::optional<std::string> checkpoint, test, variant;
  std::size_t proposals = 20, reps = 1;
  std::uint64_t seed = 1;
  bool zero_model = false;
};

int cmd_eval(const EvalArgs& a, const Context& ctx) {
  const fs::path dir = make_out_dir(a.out);
  RunManifest m(dir, "eval", ctx.argv);
  m.write();
  guarded(m, [&] {
    if (a.reps < 1) throw UsageError("--reps must be >= 1");
    const KeyValueConfig cfg = load_config(a.config, ctx);
    m["config"] = config_json(cfg);

    Model model;
    if (a.zero_model) {
      if (a.checkpoint) throw UsageError("--zero-model and --checkpoint are exclusive");
      if (!a.variant) throw UsageError("--zero-model needs --variant");
      model = Model::create(model_config_from(cfg, parse_variant(*a.variant)), 0).zeroed();
    } else {
      if (!a.checkpoint) throw UsageError("eval needs --checkpoint (or --zero-model)");
      record_inputs(m, {*a.checkpoint}, ctx);
      model = load_checkpoint(*a.checkpoint);
      if (a.variant && parse_variant(*a.variant) != model.config.variant) {
        throw UsageError("checkpoint holds variant '" + variant_name(model.config.variant) + "', not '" +
                         *a.variant + "'");
      }
    }
    const VariantId variant = model.config.variant;
    const std::string test = held_out_name(a.test, cfg);
    const auto split = leave_one_out_splits(named_entries(cfg), test);
    record_inputs(m, entry_paths(split.test.second), ctx);
    const WindowSet ws = load_window_set(split.test.second, model.config.obs, model.config.pred,
                                         size_key(cfg, "stride", 1));
    if (ws.windows.empty()) throw UsageError("test set '" + test + "' yields no windows");
    require_inputs(variant, ws.has_vislets(), ws.scene.has_value(), "test set '" + test + "'");

    m["seed"] = a.seed;
    m["variant"] = variant_name(variant);
    m["split"] = {{"test", test}};
    m["eval"] = {{"P", a.proposals}, {"reps", a.reps}, {"untrained", a.zero_model}};
    m.write();

    std::vector<MetricReport> reports;
    for (std::size_t r = 0; r < a.reps; ++r) {
      EvalOptions opt;
      opt.proposals = a.proposals;
      opt.seed = mix_seed(a.seed, r);
      opt.workers = ctx.workers;
      opt.untrained = a.zero_model;
      reports.push_back(evaluate(model, test, ws.windows, ws.scene ? &*ws.scene : nullptr, opt));
    }
    const fs::path metrics = dir / "metrics.csv", per_window = dir / "windows.csv";
    std::ofstream f = open_out(metrics);
    write_metrics_csv(f, reports);
    close_out(f, metrics);
    std::ofstream g = open_out(per_window);
    write_window_metrics_csv(g, reports.front());
    close_out(g, per_window);
    m.output("metrics", metrics);
    m.output("windows", per_window);

    double ade_mean = 0.0, fde_mean = 0.0;
    for (const MetricReport& r : reports) {
      ade_mean += r.ade / static_cast<double>(reports.size());
      fde_mean += r.fde / static_cast<double>(reports.size());
    }
    m["result"] = {{"ade", ade_mean}, {"fde", fde_mean}, {"windows", ws.windows.size()}};
    std::cout << test << ' ' << variant_name(variant) << " P=" << reports.front().proposals << " reps=" << a.reps
              << " ade=" << ade_mean << " fde=" << fde_mean << '\n';
  });
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::string out;
  double tau = kDefaultEdgeThreshold;
  std::size_t bins = 10;
};

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

void write_svg_from(const fs::path& csv, const fs::path& svg, const std::string& title) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open '" + csv.string() + "'");
  std::ofstream out = open_out(svg);
  emit_plotdata(in, csv.string(), out, title);
  close_out(out, svg);
}

int cmd_analyze(const AnalyzeArgs& a, const Context& ctx) {
  const fs::path dir = make_out_dir(a.out);
  RunManifest m(dir, "analyze", ctx.argv);
  m["params"] = {{"tau", a.tau}, {"bins", a.bins}};
  m.write();
  guarded(m, [&] {
    record_inputs(m, a.inputs, ctx);
    for (const std::string& path : a.inputs) {
      const std::string text = read_file(path);
      const std::string stem = fs::path(path).stem().string();
      const std::string head = detail::trim(first_line(text));
      std::istringstream in(text);
      if (head.rfind("window,proposal_idx,n", 0) == 0) {
        const std::vector<Dense2D> adj = read_adjacency_csv(in, path);
        const CardinalityStats cs = cardinality_stats(adj, a.tau);
        const fs::path card = dir / (stem + ".cardinality.csv"), summary = dir / (stem + ".cardinality_summary.csv");
        const fs::path hist = dir / (stem + ".histogram.csv");
        std::ofstream f1 = open_out(card), f2 = open_out(summary), f3 = open_out(hist);
        write_cardinality_csv(f1, cs);
        write_cardinality_summary_csv(f2, cs);
        write_histogram_csv(f3, density_histogram(adj, a.bins));
        close_out(f1, card);
        close_out(f2, summary);
        close_out(f3, hist);
        write_svg_from(hist, dir / (stem + ".histogram.svg"), "adjacency weight density");
        m.output(stem + ".cardinality", card);
        m.output(stem + ".cardinality_summary", summary);
        m.output(stem + ".histogram", hist);
        m.output(stem + ".histogram_svg", dir / (stem + ".histogram.svg"));
        std::cout << path << ": " << adj.size() << " adjacencies, nonzero edges p25=" << cs.p25
                  << " median=" << cs.median << " p75=" << cs.p75 << " of " << cs.full << '\n';
      } else if (head.rfind("window_id,loss", 0) == 0) {
        const NumericTable t = read_numeric_csv(in, path);
        const fs::path svg = dir / (stem + ".loss.svg");
        std::ofstream out = open_out(svg);
        write_line_svg(out, t, "window_id", {"loss", "ade"}, "online training loss");
        close_out(out, svg);
        m.output(stem + ".loss_svg", svg);
        std::cout << path << ": loss curve over " << t.rows.size() << " steps\n";
      } else {
        const fs::path svg = dir / (stem + ".svg");
        std::ofstream out = open_out(svg);
        emit_plotdata(in, path, out, stem);
        close_out(out, svg);
        m.output(stem + ".svg", svg);
        std::cout << path << ": rendered " << svg.filename().string() << '\n';
      }
    }
  });
  return kOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string out;
  std::vector<std::size_t> counts{1000, 2000, 10000, 20000};
  std::size_t peds = kMaxPedestrians, reps = 5, nmf_iters = 25;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a, const Context& ctx) {
  const fs::path dir = make_out_dir(a.out);
  RunManifest m(dir, "bench", ctx.argv);
  m["params"] = {{"counts", a.counts}, {"pedestrians", a.peds}, {"reps", a.reps}, {"nmf_iters", a.nmf_iters},
                 {"seed", a.seed}, {"workers", ctx.workers}};
  m.write();
  guarded(m, [&] {
    BenchOptions opt;
    opt.reps = a.reps;
    opt.nmf_iters = a.nmf_iters;
    opt.seed = a.seed;
    opt.workers = ctx.workers;
    const std::vector<BenchRow> rows = bench_sampling(a.counts, a.peds, opt);
    const fs::path csv = dir / "timing.csv", svg = dir / "timing.svg";
    std::ofstream f = open_out(csv);
    write_bench_csv(f, rows);
    close_out(f, csv);
    std::ifstream in(csv);
    NumericTable t = read_numeric_csv(in, csv.string());
    std::ofstream s = open_out(svg);
    write_line_svg(s, t, "samples", {"median_s"}, "sampling time per frame");
    close_out(s, svg);
    m.output("timing", csv);
    m.output("timing_svg", svg);
    std::cout << "samples  proposals  median_s  per_sample_s\n";
    for (const BenchRow& r : rows)
      std::cout << r.samples << "  " << r.proposals << "  " << r.median_s << "  " << r.per_sample_s << '\n';
  });
  return kOk;
}

// ---------------------------------------------------------------------------
// Parsing and dispatch

int dispatch(std::vector<std::string> args, Context ctx);

struct RerunArgs {
  std::string manifest, out;
};

int cmd_rerun(const RerunArgs& a, const Context& ctx) {
  Json doc;
  try {
    doc = Json::parse(read_file(a.manifest));
  } catch (const Json::parse_error& e) {
    throw FormatError(a.manifest + ": " + e.what());
  }
  if (!doc.contains("argv") || !doc["argv"].is_array()) throw FormatError(a.manifest + ": no argv recorded");
  if (doc.value("command", "") == "rerun") throw UsageError(a.manifest + ": cannot rerun a rerun");
  std::vector<std::string> args = doc["argv"].get<std::vector<std::string>>();
  // Recorded paths are relative to the original working directory.
  const std::string out = fs::absolute(a.out).string();
  bool replaced = false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" && i + 1 < args.size()) {
      args[i + 1] = out;
      replaced = true;
    } else if (args[i].rfind("--out=", 0) == 0) {
      args[i] = "--out=" + out;
      replaced = true;
    }
  }
  if (!replaced) throw FormatError(a.manifest + ": recorded argv has no --out");
  if (doc.contains("cwd")) {
    std::error_code ec;
    fs::current_path(doc["cwd"].get<std::string>(), ec);
    if (ec) throw IoError(a.manifest + ": cannot enter recorded directory " + doc["cwd"].get<std::string>());
  }
  Context next;
  next.workers = ctx.workers;
  next.argv = args;
  if (doc.contains("config")) next.expect.config = doc["config"];
  next.expect.inputs = doc.contains("inputs") ? doc["inputs"] : Json::object();
  return dispatch(args, next);
}

int dispatch(std::vector<std::string> args, Context ctx) {
  CLI::App app{"strgg: trajectory prediction with recommended neighborhood graphs", "strgg"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_version_flag("--version", kVersion);
  app.add_option("--workers", ctx.workers, "Cap on parallel workers")
      ->envname("STRGG_WORKERS")
      ->check(CLI::PositiveNumber);

  IngestArgs ingest;
  auto* ci = app.add_subcommand("ingest", "Window a trajectory file into a checksummed archive");
  ci->add_option("--data", ingest.data, "Trajectory file (frame ped x y [v0 v1])")->required();
  ci->add_option("--map", ingest.map, "Scene map (PGM or CSV grid)");
  ci->add_option("--out", ingest.out, "Output directory")->required();
  ci->add_option("--obs", ingest.obs, "Observed steps");
  ci->add_option("--pred", ingest.pred, "Predicted steps");
  ci->add_option("--stride", ingest.stride, "Window stride in frames");

  TrainArgs train;
  auto* ct = app.add_subcommand("train", "Online training over all non-held-out sets");
  ct->add_option("--config", train.config, "Key-value config")->required();
  ct->add_option("--out", train.out, "Output directory")->required();
  ct->add_option("--variant", train.variant, "Model variant (overrides config 'variant')");
  ct->add_option("--hold-out", train.hold_out, "Held-out set name (overrides config 'hold_out')");
  ct->add_option("--seed", train.seed, "Seed (overrides train.seed)");
  ct->add_option("--epochs", train.epochs, "Passes over the stream (overrides train.epochs)");
  ct->add_option("--P", train.proposals, "Proposals per window (overrides train.proposals)");
  ct->add_option("--lr", train.lr, "Learning rate (overrides train.lr)");
  ct->add_option("--decay", train.decay, "Per-epoch decay (overrides train.decay)");
  ct->add_option("--keep", train.keep, "Dropout keep probability (overrides train.keep)");
  ct->add_option("--optimizer", train.optimizer, "adam or sgd (overrides train.optimizer)");
  ct->add_option("--adjacency-every", train.adjacency_every, "Log proposal adjacencies every k-th step");

  EvalArgs eval;
  auto* ce = app.add_subcommand("eval", "Best-of-P evaluation on a held-out set");
  ce->add_option("--config", eval.config, "Key-value config")->required();
  ce->add_option("--out", eval.out, "Output directory")->required();
  ce->add_option("--checkpoint", eval.checkpoint, "Checkpoint from train");
  ce->add_option("--test", eval.test, "Test set name (defaults to config 'hold_out')");
  ce->add_option("--variant", eval.variant, "Expected variant; required with --zero-model");
  ce->add_option("--P", eval.proposals, "Proposals per window")->check(CLI::PositiveNumber);
  ce->add_option("--reps", eval.reps, "Repetitions with derived seeds");
  ce->add_option("--seed", eval.seed, "Base seed");
  ce->add_flag("--zero-model", eval.zero_model, "Score the untrained zero-parameter model");

  AnalyzeArgs analyze;
  auto* ca = app.add_subcommand("analyze", "Cardinality, density histograms and plots from run CSVs");
  ca->add_option("--in", analyze.inputs, "adjacency.csv, runlog.csv or any numeric CSV")->required();
  ca->add_option("--out", analyze.out, "Output directory")->required();
  ca->add_option("--tau", analyze.tau, "Nonzero-edge threshold");
  ca->add_option("--bins", analyze.bins, "Histogram bins");

  BenchArgs bench;
  auto* cb = app.add_subcommand("bench", "Sampling-time table");
  cb->add_option("--out", bench.out, "Output directory")->required();
  cb->add_option("--counts", bench.counts, "Trajectory counts per frame")->delimiter(',');
  cb->add_option("--peds", bench.peds, "Pedestrians per frame");
  cb->add_option("--reps", bench.reps, "Repetitions per count (median reported)");
  cb->add_option("--nmf-iters", bench.nmf_iters, "NMF iterations per proposal");
  cb->add_option("--seed", bench.seed, "Seed");

  RerunArgs rerun;
  auto* cr = app.add_subcommand("rerun", "Repeat a recorded run into a new directory");
  cr->add_option("--manifest", rerun.manifest, "manifest.json of the original run")->required();
  cr->add_option("--out", rerun.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", kUsage, e.what());
    return kUsage;
  }
  if (ctx.argv.empty()) ctx.argv = args;

  if (ci->parsed()) return cmd_ingest(ingest, ctx);
  if (ct->parsed()) return cmd_train(train, ctx);
  if (ce->parsed()) return cmd_eval(eval, ctx);
  if (ca->parsed()) return cmd_analyze(analyze, ctx);
  if (cb->parsed()) return cmd_bench(bench, ctx);
  if (cr->parsed()) return cmd_rerun(rerun, ctx);
  return kUsage;
}

}  // namespace
}  // namespace strgg::cli

int main(int argc, char** argv) {
  using namespace strgg;
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return cli::dispatch(args, {});
  } catch (const Error& e) {
    const int code = cli::exit_code_for(e);
    cli::report_error(e.kind(), code, e.what());
    return code;
  } catch (const std::bad_alloc&) {
    cli::report_error("memory", cli::kNumerical, "out of memory");
    return cli::kNumerical;
  } catch (const std::exception& e) {
    cli::report_error("internal", 1, e.what());
    return 1;
  }
}
