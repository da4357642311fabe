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

// Checkpoint layout (all integers and doubles little-endian):
//
//   "STRGGCKP"  u32 version  u64 config_len  config text (key=value lines)
//   u64 blocks, then per block: u64 name_len  name  u64 rows  u64 cols  f64[rows*cols]

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "strgg/model/model.hpp"

namespace strgg {

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'R', 'G', 'G', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(b, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(b, 4);
}

class ByteReader {
 public:
  ByteReader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(origin_ + ": truncated checkpoint");
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | b[k];
    return v;
  }
  std::string text(std::uint64_t limit) {
    const std::uint64_t n = u64();
    if (n > limit) throw FormatError(concat(origin_, ": implausible string length ", n));
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string origin_;
};

}  // namespace detail

/// Model configuration as key=value lines.
inline std::string model_config_text(const ModelConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "variant=" << variant_name(c.variant) << '\n'
    << "max_peds=" << c.max_peds << '\n'
    << "hidden=" << c.hidden << '\n'
    << "out=" << c.out << '\n'
    << "obs=" << c.obs << '\n'
    << "pred=" << c.pred << '\n'
    << "dec_hidden=" << c.dec_hidden << '\n'
    << "decode=" << (c.decode == DecodeMode::kResidual ? "residual" : "absolute") << '\n'
    << "input_scale=" << c.input_scale << '\n'
    << "gaussian_h_o=" << (c.gaussian_h_o ? "true" : "false") << '\n'
    << "policy="
    << (c.policy == AdjacencyPolicy::kSgtvInverseDistance ? "sgtv"
        : c.policy == AdjacencyPolicy::kMcrSoftmaxHidden ? "mcr"
                                                          : "str")
    << '\n'
    << "nmf_rank=" << c.nmf_rank << '\n'
    << "nmf_max_iters=" << c.nmf_max_iters << '\n'
    << "nmf_tol=" << c.nmf_tol << '\n';
  return o.str();
}

/// Inverse of model_config_text; unknown keys are a format error.
inline ModelConfig parse_model_config(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(origin + ": bad config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig c;
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(origin + ": config lacks '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto size = [&](const char* key) {
    const std::string v = take(key);
    try {
      return static_cast<std::size_t>(std::stoull(v));
    } catch (const std::exception&) {
      throw FormatError(origin + ": bad value for '" + key + "': " + v);
    }
  };
  auto real = [&](const char* key) {
    const std::string v = take(key);
    double d = 0.0;
    if (!detail::parse_double(v, d)) throw FormatError(origin + ": bad value for '" + key + "': " + v);
    return d;
  };
  c.variant = parse_variant(take("variant"));
  c.max_peds = size("max_peds");
  c.hidden = size("hidden");
  c.out = size("out");
  c.obs = size("obs");
  c.pred = size("pred");
  c.dec_hidden = size("dec_hidden");
  c.decode = parse_decode_mode(take("decode"));
  c.input_scale = real("input_scale");
  c.gaussian_h_o = take("gaussian_h_o") == "true";
  c.policy = parse_policy(take("policy"));
  c.nmf_rank = size("nmf_rank");
  c.nmf_max_iters = size("nmf_max_iters");
  c.nmf_tol = real("nmf_tol");
  if (!kv.empty()) throw FormatError(origin + ": unknown config key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

inline void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  const std::string cfg = model_config_text(model.config);
  detail::put_u64(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  detail::put_u64(out, model.params.size());
  for (const auto& [name, block] : model.params) {
    detail::put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(out, block.rows());
    detail::put_u64(out, block.cols());
    for (double v : block.values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out.flush()) throw IoError("failed writing checkpoint " + path);
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  detail::ByteReader r(in, path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError(path + ": not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(detail::concat(path, ": checkpoint version ", version, ", expected ",
                                     kCheckpointVersion));
  }
  Model m;
  m.config = parse_model_config(r.text(1 << 20), path);
  const std::uint64_t blocks = r.u64();
  if (blocks > 10000) throw FormatError(detail::concat(path, ": implausible block count ", blocks));
  for (std::uint64_t b = 0; b < blocks; ++b) {
    std::string name = r.text(4096);
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (rows > (1u << 20) || cols > (1u << 20) || rows * cols > (1u << 26)) {
      throw FormatError(detail::concat(path, ": implausible block ", name, " [", rows, "x", cols, "]"));
    }
    Dense2D block(rows, cols);
    for (std::size_t k = 0; k < block.size(); ++k) {
      block[k] = std::bit_cast<double>(r.u64());
      if (!std::isfinite(block[k])) throw FormatError(path + ": non-finite value in " + name);
    }
    m.params.emplace(std::move(name), std::move(block));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
  return m;
}

}  // namespace strgg
