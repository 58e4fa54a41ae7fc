// Copyright 2026 The rwsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Umbrella header for the rwsynth library.

#include "rwsynth/config.hpp"
#include "rwsynth/data_model.hpp"
#include "rwsynth/design.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/mcmc_diagnostics.hpp"
#include "rwsynth/mixture_sampler.hpp"
#include "rwsynth/nb_sampler.hpp"
#include "rwsynth/parallel.hpp"
#include "rwsynth/pipeline.hpp"
#include "rwsynth/report.hpp"
#include "rwsynth/risk.hpp"
#include "rwsynth/rng.hpp"
#include "rwsynth/simulation.hpp"
#include "rwsynth/stats.hpp"
#include "rwsynth/synth.hpp"
#include "rwsynth/utility.hpp"
#include "rwsynth/weights.hpp"
