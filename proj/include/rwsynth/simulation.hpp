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

// Data generators: the two-component negative binomial mixture used in the
// simulation study and a stand-in for the consumer expenditure sample.

#include <cmath>
#include <cstdint>
#include <array>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "rwsynth/data_model.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/rng.hpp"

namespace rwsynth {

struct NBMixtureSpec {
  std::size_t n = 1000;
  std::array<double, 2> theta{0.7, 0.3};
  std::array<double, 2> mu{100.0, 100.0};
  std::array<double, 2> phi{20.0, 5.0};
  std::uint64_t seed = 1;

  void validate() const {
    if (n == 0) throw InputError("simulation.n must be >= 1");
    for (int k = 0; k < 2; ++k) {
      if (!(theta[k] >= 0.0)) throw InputError("simulation.theta must be nonnegative");
      if (!(mu[k] > 0.0) || !(phi[k] > 0.0)) {
        throw InputError("simulation.mu and simulation.phi must be positive");
      }
    }
    if (std::abs(theta[0] + theta[1] - 1.0) > 1e-12) {
      throw InputError("simulation.theta must sum to 1");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n"] = n;
    j["theta"] = theta;
    j["mu"] = mu;
    j["phi"] = phi;
    j["seed"] = seed;
    return j;
  }
};

/// Schema of generated count data: a constant pattern column and the count.
inline Schema nb_mixture_schema() {
  return Schema::make({
      {"id", ColumnRole::kId, ColumnKind::kText, {}},
      {"All", ColumnRole::kPattern, ColumnKind::kCategorical, {"all"}},
      {"y", ColumnRole::kSensitive, ColumnKind::kContinuous, {}},
  });
}

/// Component k ~ Categorical(theta), then y ~ NB(mu_k, phi_k).
/// `components`, when given, receives the drawn component of each record.
inline Dataset generate_nb_mixture(const NBMixtureSpec& spec,
                                   std::vector<int>* components = nullptr) {
  spec.validate();
  Rng rng = make_rng(spec.seed, "simulation", 0);
  const Schema schema = nb_mixture_schema();
  std::vector<Record> recs(spec.n);
  std::vector<std::string> ids(spec.n);
  if (components) components->assign(spec.n, 0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int k = uniform01(rng) < spec.theta[0] ? 0 : 1;
    if (components) (*components)[i] = k;
    recs[i].id = i;
    recs[i].codes = {-1, 0, -1};
    recs[i].y = negative_binomial_draw(spec.mu[k], spec.phi[k], rng);
    ids[i] = std::to_string(i + 1);
  }
  return Dataset(schema, std::move(recs), std::move(ids));
}

/// Columns of the expenditure-survey stand-in. Pattern variables are
/// Gender, Age and Region (2 x 5 x 4 = 40 cells); the remaining
/// categorical columns are predictors.
inline Schema ce_fixture_schema() {
  return Schema::make({
      {"id", ColumnRole::kId, ColumnKind::kText, {}},
      {"Gender", ColumnRole::kPattern, ColumnKind::kCategorical, {"M", "F"}},
      {"Age", ColumnRole::kPattern, ColumnKind::kCategorical,
       {"A1", "A2", "A3", "A4", "A5"}},
      {"Education", ColumnRole::kPredictor, ColumnKind::kCategorical,
       {"E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8"}},
      {"Region", ColumnRole::kPattern, ColumnKind::kCategorical, {"R1", "R2", "R3", "R4"}},
      {"Urban", ColumnRole::kPredictor, ColumnKind::kCategorical, {"U1", "U2"}},
      {"Earner", ColumnRole::kPredictor, ColumnKind::kCategorical, {"1", "2"}},
      {"Income", ColumnRole::kSensitive, ColumnKind::kContinuous, {}},
  });
}

inline constexpr std::size_t kCeFixtureCells = 40;
/// Two records per cell are needed before every cell is non-singleton.
inline constexpr std::size_t kCeFixtureMinRows = 2 * kCeFixtureCells;

/// Synthetic consumer-unit table. The first 80 rows seed every
/// Gender x Age x Region cell twice; the rest fall in random cells. Income is
/// a right-skewed lognormal mixture (median near 50K, 97.5% point near 270K)
/// shifted by education and earner effects, plus a 1% mass of small
/// negative values down to -7K.
inline Dataset generate_ce_fixture(std::size_t n, std::uint64_t seed) {
  if (n < kCeFixtureMinRows) {
    throw InputError("CE fixture needs n >= " + std::to_string(kCeFixtureMinRows) +
                     " so all 40 Gender x Age x Region cells hold at least two records (got " +
                     std::to_string(n) + ")");
  }
  Rng rng = make_rng(seed, "simulation", 1);
  const Schema schema = ce_fixture_schema();
  std::vector<Record> recs(n);
  std::vector<std::string> ids(n);
  std::discrete_distribution<int> edu_dist({4, 8, 25, 18, 10, 20, 11, 4});
  for (std::size_t i = 0; i < n; ++i) {
    int gender, age, region;
    if (i < kCeFixtureMinRows) {
      const std::size_t cell = i / 2;
      gender = static_cast<int>(cell % 2);
      age = static_cast<int>((cell / 2) % 5);
      region = static_cast<int>(cell / 10);
    } else {
      gender = static_cast<int>(rng() % 2);
      age = static_cast<int>(rng() % 5);
      region = static_cast<int>(rng() % 4);
    }
    const int edu = edu_dist(rng);
    const int urban = uniform01(rng) < 0.9 ? 0 : 1;
    const int earner = uniform01(rng) < 0.7 ? 0 : 1;
    double y;
    const double u = uniform01(rng);
    if (u < 0.01) {
      y = -std::round(7000.0 * uniform01(rng));
    } else {
      const double loc = 10.55 + 0.09 * (edu - 3) + 0.25 * (earner == 0) - 0.1 * urban +
                         0.08 * (age == 2 || age == 3);
      const double scale = u < 0.9 ? 0.75 : 1.05;
      y = std::round(std::exp(loc + scale * std_normal(rng)));
      y = std::min(y, 1.8e6);
    }
    recs[i].id = i;
    recs[i].codes = {-1, gender, age, edu, region, urban, earner, -1};
    recs[i].y = y;
    ids[i] = "CU" + std::to_string(100000 + i);
  }
  return Dataset(schema, std::move(recs), std::move(ids));
}

}  // namespace rwsynth
