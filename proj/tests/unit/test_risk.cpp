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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "rwsynth/risk.hpp"
#include "risk_oracles.hpp"
#include "test_util.hpp"

namespace rwsynth {
namespace {

using testing::make_dataset;
using testing::random_dataset;

using testing::naive_marginal;
using testing::naive_pair;

// Betty's pattern of 13: her true value is 100 (record 0).
Dataset betty_conf() {
  std::vector<double> y(13, 0.0);
  for (int i = 0; i < 13; ++i) y[i] = 100.0 + 7.0 * i;
  return make_dataset(std::vector<int>(13, 0), y);
}

Dataset betty_syn(const Dataset& conf, double own, int others_inside) {
  std::vector<double> y(13, 500.0);
  y[0] = own;
  for (int k = 1; k <= others_inside; ++k) y[k] = 90.0 + k;
  return conf.with_sensitive(y);
}

TEST(MarginalRiskTest, BettyCases) {
  const Dataset conf = betty_conf();
  const PatternIndex idx = build_pattern_index(conf, {"P"});
  const BallConfig cfg{0.2};
  // (a) 10 outside, own value close.
  auto a = marginal_risk_synthetic(conf, betty_syn(conf, 105.0, 2), idx, cfg);
  EXPECT_EQ(a[0], 10.0 / 13.0);
  // (b) 5 outside.
  auto b = marginal_risk_synthetic(conf, betty_syn(conf, 105.0, 7), idx, cfg);
  EXPECT_EQ(b[0], 5.0 / 13.0);
  // (c) same counts as (a) but her own synthetic value is far: T = 0.
  std::vector<double> yc(13, 500.0);
  yc[0] = 150.0;
  yc[1] = 91.0;
  yc[2] = 92.0;
  yc[3] = 93.0;
  auto c = marginal_risk_synthetic(conf, conf.with_sensitive(yc), idx, cfg);
  const auto counts = marginal_risk_counts(conf.y(), yc, idx, cfg);
  EXPECT_EQ(counts.outside[0], 10u);
  EXPECT_EQ(c[0], 0.0);
}

TEST(MarginalRiskTest, IdenticalValuesGiveZero) {
  const Dataset ds = make_dataset({0, 0, 0, 1, 1}, {5, 5, 5, -3, -3});
  const auto rv = marginal_risk_confidential(ds, build_pattern_index(ds, {"P"}), BallConfig{0.2});
  for (double v : rv.values) EXPECT_EQ(v, 0.0);
}

TEST(MarginalRiskTest, SyntheticCopyEqualsConfidential) {
  std::mt19937_64 rng(3);
  const Dataset ds = random_dataset(rng, 150, 6);
  const auto idx = build_pattern_index(ds, {"P"});
  const BallConfig cfg{0.25};
  EXPECT_EQ(marginal_risk_synthetic(ds, ds, idx, cfg).values,
            marginal_risk_confidential(ds, idx, cfg).values);
}

TEST(MarginalRiskTest, MatchesBruteForceOracle) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset ds = random_dataset(rng, 12 + 9 * rep, 1 + rep % 5);
    const auto idx = build_pattern_index(ds, {"P"});
    for (double r : {0.15, 0.2, 0.25, 0.3}) {
      const BallConfig cfg{r};
      EXPECT_EQ(marginal_risk_confidential(ds, idx, cfg).values, naive_marginal(ds, cfg));
      std::vector<double> rel = ds.y();
      std::normal_distribution<double> noise(0.0, 5.0);
      for (auto& v : rel) v += noise(rng);
      EXPECT_EQ(marginal_risk_synthetic(ds, ds.with_sensitive(rel), idx, cfg).values,
                naive_marginal(ds, cfg, &rel));
    }
  }
}

TEST(MarginalRiskTest, PropertiesOverRandomFixtures) {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset ds = random_dataset(rng, 120, 4);
    const auto idx = build_pattern_index(ds, {"P"});
    std::vector<double> prev;
    for (double r : {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.5}) {
      const auto rv = marginal_risk_confidential(ds, idx, BallConfig{r});
      for (std::size_t i = 0; i < rv.size(); ++i) {
        EXPECT_GE(rv[i], 0.0);
        EXPECT_LE(rv[i], 1.0);
        if (!prev.empty()) {
          EXPECT_LE(rv[i], prev[i]);
        }
      }
      prev = rv.values;
    }
    // Synthetic risk never exceeds the coverage share and vanishes with T = 0.
    std::vector<double> rel = ds.y();
    std::normal_distribution<double> noise(0.0, 8.0);
    for (auto& v : rel) v += noise(rng);
    const auto counts = marginal_risk_counts(ds.y(), rel, idx, BallConfig{0.2});
    const auto rv = counts.to_risk(RiskContext::kSynthetic);
    for (std::size_t i = 0; i < rv.size(); ++i) {
      EXPECT_LE(rv[i], static_cast<double>(counts.outside[i]) / counts.group_size[i]);
      if (!counts.own_close[i]) {
        EXPECT_EQ(rv[i], 0.0);
      }
    }
  }
}

TEST(MarginalRiskTest, LabelInvariantUnderPermutation) {
  std::mt19937_64 rng(4);
  const Dataset ds = random_dataset(rng, 60, 3);
  std::vector<std::size_t> perm(ds.n());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> p(ds.n());
  std::vector<double> y(ds.n());
  for (std::size_t k = 0; k < ds.n(); ++k) {
    p[k] = ds.code(perm[k], 0);
    y[k] = ds.record(perm[k]).y;
  }
  const Dataset shuffled = make_dataset(p, y, 3);
  const BallConfig cfg{0.2};
  const auto a = marginal_risk_confidential(ds, build_pattern_index(ds, {"P"}), cfg);
  const auto b = marginal_risk_confidential(shuffled, build_pattern_index(shuffled, {"P"}), cfg);
  for (std::size_t k = 0; k < ds.n(); ++k) EXPECT_EQ(b[k], a[perm[k]]);
}

TEST(MarginalRiskTest, SingletonPolicy) {
  const Dataset ds = make_dataset({0, 0, 1}, {1, 2, 3});
  const auto idx = build_pattern_index(ds, {"P"});
  EXPECT_THROW(marginal_risk_confidential(ds, idx, BallConfig{0.2}), InputError);
  const auto rv = marginal_risk_confidential(ds, idx, BallConfig{0.2}, SingletonPolicy::kFloor);
  EXPECT_EQ(rv.singletons, (std::vector<std::size_t>{2}));
  EXPECT_THROW(pairwise_risk_confidential(ds, idx, BallConfig{0.2}), InputError);
}

TEST(MarginalRiskTest, SyntheticMismatchErrors) {
  const Dataset a = make_dataset({0, 0, 1, 1}, {1, 2, 3, 4});
  const Dataset b = make_dataset({0, 1, 1, 0}, {1, 2, 3, 4});
  const Dataset c = make_dataset({0, 0}, {1, 2});
  const auto idx = build_pattern_index(a, {"P"});
  EXPECT_THROW(marginal_risk_synthetic(a, b, idx, BallConfig{0.2}), InputError);
  EXPECT_THROW(marginal_risk_synthetic(a, c, idx, BallConfig{0.2}), InputError);
}

TEST(AverageRiskTest, Cases) {
  RiskVector a, b;
  a.values = {0.4};
  b.values = {0.6};
  std::vector<RiskVector> two{a, b};
  EXPECT_DOUBLE_EQ(average_risks(two)[0], 0.5);
  std::vector<RiskVector> one{a};
  EXPECT_EQ(average_risks(one).values, a.values);
  EXPECT_EQ(average_risks(one).context, RiskContext::kAveraged);
  EXPECT_THROW(average_risks(std::vector<RiskVector>{}), InputError);
  RiskVector c;
  c.values = {0.1, 0.2};
  EXPECT_THROW(average_risks(std::vector<RiskVector>{a, c}), InputError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<RiskVector> many(20);
  for (auto& rv : many) {
    rv.values.resize(30);
    for (auto& v : rv.values) v = u(rng);
  }
  const auto avg = average_risks(many);
  for (std::size_t i = 0; i < 30; ++i) {
    double s = 0.0;
    for (const auto& rv : many) s += rv.values[i];
    EXPECT_NEAR(avg[i], s / 20.0, 1e-15);
  }
}

TEST(PairwiseRiskTest, HandExample) {
  const Dataset ds = make_dataset({0, 0, 0}, {10, 10, 1000});
  const auto idx = build_pattern_index(ds, {"P"});
  const auto pm = pairwise_risk_confidential(ds, idx, BallConfig{0.2});
  EXPECT_EQ(pm.at(0, 1), 1.0 / 3.0);
  EXPECT_EQ(pm.at(0, 2), 0.0);
  EXPECT_EQ(pm.at(2, 0), 0.0);
  EXPECT_EQ(pm.entry_count(), 3u);
}

TEST(PairwiseRiskTest, IdenticalValuesAndCrossPattern) {
  const Dataset ds = make_dataset({0, 0, 0, 1, 1}, {4, 4, 4, 9, 100});
  const auto idx = build_pattern_index(ds, {"P"});
  const auto pm = pairwise_risk_confidential(ds, idx, BallConfig{0.2});
  EXPECT_EQ(pm.at(0, 1), 0.0);
  EXPECT_EQ(pm.at(1, 2), 0.0);
  EXPECT_EQ(pm.at(0, 3), 0.0);  // different patterns
  EXPECT_EQ(pm.entry_count(), 3u + 1u);
}

TEST(PairwiseRiskTest, MatchesBruteForceAndBoundedByMarginal) {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 8; ++rep) {
    const Dataset ds = random_dataset(rng, 40 + 20 * rep, 1 + rep);
    const auto idx = build_pattern_index(ds, {"P"});
    for (double r : {0.15, 0.2, 0.25, 0.3}) {
      const BallConfig cfg{r};
      const auto pm = pairwise_risk_confidential(ds, idx, cfg);
      const auto marg = marginal_risk_confidential(ds, idx, cfg);
      for (std::size_t i = 0; i < ds.n(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < ds.n(); ++j) {
          const double v = pm.at(i, j);
          ASSERT_EQ(v, naive_pair(ds, i, j, cfg)) << i << "," << j;
          EXPECT_LE(v, std::min(marg[i], marg[j]));
          row += v;
        }
        EXPECT_NEAR(pm.row_sum(i), row, 1e-12);
      }
    }
  }
}

TEST(PairwiseRiskTest, ForEachVisitsEveryPairOnce) {
  std::mt19937_64 rng(8);
  const Dataset ds = random_dataset(rng, 50, 4);
  const auto idx = build_pattern_index(ds, {"P"});
  const auto pm = pairwise_risk_confidential(ds, idx, BallConfig{0.2});
  std::size_t visits = 0;
  pm.for_each([&](std::size_t i, std::size_t j, double v) {
    EXPECT_LT(i, j);
    EXPECT_EQ(v, pm.at(i, j));
    ++visits;
  });
  EXPECT_EQ(visits, pm.entry_count());
}

TEST(RiskSummaryTest, Cases) {
  RiskVector c;
  c.values.assign(10, 0.3);
  auto s = risk_summary(c);
  EXPECT_DOUBLE_EQ(s.mean, 0.3);
  EXPECT_DOUBLE_EQ(s.iqr, 0.0);
  RiskVector d;
  d.values = {0.0, 1.0};
  s = risk_summary(d);
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.max, 1.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  RiskVector r;
  r.values.resize(37);
  for (auto& v : r.values) v = u(rng);
  s = risk_summary(r);
  std::vector<double> sorted = r.values;
  std::sort(sorted.begin(), sorted.end());
  auto q7 = [&](double p) {
    const double h = (sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
  };
  EXPECT_NEAR(s.median, q7(0.5), 1e-15);
  EXPECT_NEAR(s.iqr, q7(0.75) - q7(0.25), 1e-15);
  ASSERT_EQ(s.quantiles.size(), 99u);
  for (int p = 1; p <= 99; ++p) EXPECT_NEAR(s.quantiles[p - 1], q7(p / 100.0), 1e-15);
  EXPECT_TRUE(std::is_sorted(s.quantiles.begin(), s.quantiles.end()));
}

}  // namespace
}  // namespace rwsynth
