/*
 Copyright 2026 The mfpmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

// Umbrella header for the solver library. Config files and CSV/JSON output
// live in mfpmp/experiment.hpp, which also needs nlohmann/json.

#include "mfpmp/core.hpp"
#include "mfpmp/problem.hpp"
#include "mfpmp/random.hpp"
#include "mfpmp/bridge.hpp"
#include "mfpmp/regression.hpp"
#include "mfpmp/dynamics.hpp"
#include "mfpmp/solver.hpp"
#include "mfpmp/benchmarks.hpp"
#include "mfpmp/oracles.hpp"
#include "mfpmp/verify.hpp"
