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

// Brute-force risk oracles shared by the unit and acceptance tests. They
// loop over every record pair (and triple) directly and share no code with
// the bitset implementation under test.

#include <cstddef>
#include <vector>

#include "rwsynth/data_model.hpp"

namespace rwsynth::testing {

/// Marginal risk by a direct loop over (i, h). With `released` the balls
/// stay centred at the truths and membership uses the released values.
inline std::vector<double> naive_marginal(const Dataset& ds, const BallConfig& cfg,
                                          const std::vector<double>* released = nullptr) {
  const std::size_t n = ds.n();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t size = 0, outside = 0;
    for (std::size_t h = 0; h < n; ++h) {
      if (ds.record(h).codes != ds.record(i).codes) continue;
      ++size;
      const double yh = released ? (*released)[h] : ds.record(h).y;
      if (!in_ball(yh, ds.record(i).y, cfg)) ++outside;
    }
    const double own = released ? (*released)[i] : ds.record(i).y;
    out[i] = in_ball(own, ds.record(i).y, cfg) ? static_cast<double>(outside) / size : 0.0;
  }
  return out;
}

/// Pairwise risk of (i, j) by a direct loop over h.
inline double naive_pair(const Dataset& ds, std::size_t i, std::size_t j, const BallConfig& cfg) {
  if (ds.record(i).codes != ds.record(j).codes || i == j) return 0.0;
  std::size_t size = 0, outside = 0;
  for (std::size_t h = 0; h < ds.n(); ++h) {
    if (ds.record(h).codes != ds.record(i).codes) continue;
    ++size;
    const double yh = ds.record(h).y;
    if (!in_ball(yh, ds.record(i).y, cfg) && !in_ball(yh, ds.record(j).y, cfg)) ++outside;
  }
  return static_cast<double>(outside) / size;
}

}  // namespace rwsynth::testing
