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

// Umbrella header.

#pragma once

#include "strgg/data/dataset.hpp"
#include "strgg/data/scene.hpp"
#include "strgg/data/synthetic.hpp"
#include "strgg/data/trajectory.hpp"
#include "strgg/eval/evaluation.hpp"
#include "strgg/eval/metrics.hpp"
#include "strgg/io/archive.hpp"
#include "strgg/io/checkpoint.hpp"
#include "strgg/io/config.hpp"
#include "strgg/log.hpp"
#include "strgg/model/encoders.hpp"
#include "strgg/model/kernel.hpp"
#include "strgg/model/model.hpp"
#include "strgg/model/recommender.hpp"
#include "strgg/numerics/binder.hpp"
#include "strgg/numerics/dense.hpp"
#include "strgg/numerics/errors.hpp"
#include "strgg/numerics/nmf.hpp"
#include "strgg/numerics/optim.hpp"
#include "strgg/numerics/rng.hpp"
#include "strgg/numerics/tape.hpp"
#include "strgg/train/training.hpp"
#include "strgg/version.hpp"
