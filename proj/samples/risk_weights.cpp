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

// Library walk-through: build a survey-like table, score confidential
// identification risk, and turn the risks into marginal and pairwise
// likelihood weights.

#include <iostream>

#include "rwsynth/rwsynth.hpp"

int main() {
  using namespace rwsynth;
  const Dataset ds = generate_ce_fixture(2000, 7);
  const PatternIndex idx = build_pattern_index(ds, {"Gender", "Age", "Region"});
  const BallConfig ball{0.2};

  const RiskVector risk = marginal_risk_confidential(ds, idx, ball);
  const PairRiskMap pairs = pairwise_risk_confidential(ds, idx, ball);
  const WeightVector marginal = marginal_weights(risk);
  const WeightVector pairwise = pairwise_weights(pairs);

  const RiskSummary s = risk_summary(risk);
  std::cout << "records " << ds.n() << ", patterns " << idx.group_count() << "\n"
            << "confidential risk: mean " << s.mean << ", median " << s.median << ", max "
            << s.max << "\n";
  double mlo = 1.0, plo = 1.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    mlo = std::min(mlo, marginal[i]);
    plo = std::min(plo, pairwise[i]);
  }
  std::cout << "smallest marginal weight " << mlo << ", smallest pairwise weight " << plo << "\n";
  return 0;
}
