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

#include <map>
#include <string>

#include "strgg/numerics/optim.hpp"
#include "strgg/numerics/tape.hpp"

namespace strgg {

/// Lazily places named parameter blocks on a tape, once each.
class Binder {
 public:
  Binder(Tape& tape, const ParameterSet& params) : tape_(tape), params_(params) {}

  Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    auto p = params_.find(name);
    if (p == params_.end()) throw UsageError("model has no parameter '" + name + "'");
    Var v = tape_.parameter(p->second, name);
    bound_.emplace(name, v);
    return v;
  }

  bool has(const std::string& name) const { return params_.count(name) != 0; }
  const Dense2D& value(const std::string& name) const {
    auto p = params_.find(name);
    if (p == params_.end()) throw UsageError("model has no parameter '" + name + "'");
    return p->second;
  }
  Tape& tape() noexcept { return tape_; }
  Var constant(Dense2D v) { return tape_.constant(std::move(v)); }

 private:
  Tape& tape_;
  const ParameterSet& params_;
  std::map<std::string, Var> bound_;
};

}  // namespace strgg
