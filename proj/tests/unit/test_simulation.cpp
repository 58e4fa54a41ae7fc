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

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "rwsynth/risk.hpp"
#include "rwsynth/simulation.hpp"

namespace rwsynth {
namespace {

TEST(NBMixtureSimulationTest, ComponentShareAndMoments) {
  NBMixtureSpec spec;
  spec.n = 20000;
  spec.seed = 3;
  std::vector<int> comp;
  const auto ds = generate_nb_mixture(spec, &comp);
  ASSERT_EQ(ds.n(), spec.n);
  ASSERT_EQ(comp.size(), spec.n);
  double share = 0.0;
  std::vector<double> y0, y1;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    share += comp[i] == 0 ? 1.0 : 0.0;
    (comp[i] == 0 ? y0 : y1).push_back(ds.record(i).y);
    EXPECT_EQ(ds.record(i).y, std::floor(ds.record(i).y));
    EXPECT_GE(ds.record(i).y, 0.0);
  }
  share /= static_cast<double>(ds.n());
  EXPECT_NEAR(share, 0.7, 4.0 * std::sqrt(0.21 / 20000.0));
  // Component variances are 100 + 100^2/20 = 600 and 100 + 100^2/5 = 2100.
  EXPECT_NEAR(stats::mean(y0), 100.0, 4.0 * std::sqrt(600.0 / y0.size()));
  EXPECT_NEAR(stats::mean(y1), 100.0, 4.0 * std::sqrt(2100.0 / y1.size()));
  EXPECT_NEAR(stats::variance(y0), 600.0, 60.0);
  EXPECT_NEAR(stats::variance(y1), 2100.0, 250.0);
}

TEST(NBMixtureSimulationTest, DeterministicPerSeedAndValidated) {
  NBMixtureSpec spec;
  spec.n = 200;
  EXPECT_EQ(generate_nb_mixture(spec).y(), generate_nb_mixture(spec).y());
  auto other = spec;
  other.seed = 2;
  EXPECT_NE(generate_nb_mixture(spec).y(), generate_nb_mixture(other).y());
  auto bad = spec;
  bad.theta = {0.5, 0.6};
  EXPECT_THROW(generate_nb_mixture(bad), InputError);
  bad = spec;
  bad.mu = {0.0, 1.0};
  EXPECT_THROW(generate_nb_mixture(bad), InputError);
  bad = spec;
  bad.n = 0;
  EXPECT_THROW(generate_nb_mixture(bad), InputError);
}

TEST(CeFixtureTest, EveryCellHasTwoRecords) {
  const auto ds = generate_ce_fixture(kCeFixtureMinRows, 1);
  const auto idx = build_pattern_index(ds, ds.schema().pattern_columns());
  EXPECT_EQ(idx.group_count(), kCeFixtureCells);
  EXPECT_TRUE(idx.singleton_records().empty());
  EXPECT_THROW(generate_ce_fixture(kCeFixtureMinRows - 1, 1), InputError);
}

TEST(CeFixtureTest, IncomeShape) {
  const auto ds = generate_ce_fixture(20000, 2);
  auto y = ds.y();
  std::size_t negatives = 0;
  for (double v : y) {
    negatives += v < 0.0 ? 1 : 0;
    EXPECT_GE(v, -7000.0);
    EXPECT_LE(v, 1.8e6);
    EXPECT_EQ(v, std::round(v));
  }
  const double neg_share = static_cast<double>(negatives) / y.size();
  EXPECT_NEAR(neg_share, 0.01, 0.004);
  const double med = stats::median(y);
  EXPECT_GT(med, 35000.0);
  EXPECT_LT(med, 70000.0);
  // Right skew: the mean exceeds the median and the upper tail is long.
  EXPECT_GT(stats::mean(y), med);
  EXPECT_GT(stats::quantile(y, 0.975), 4.0 * med);
  const auto& ids = ds.id_labels();
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), ids.size());
}

TEST(CeFixtureTest, DeterministicPerSeed) {
  EXPECT_EQ(generate_ce_fixture(500, 9).y(), generate_ce_fixture(500, 9).y());
  EXPECT_NE(generate_ce_fixture(500, 9).y(), generate_ce_fixture(500, 10).y());
}

}  // namespace
}  // namespace rwsynth
