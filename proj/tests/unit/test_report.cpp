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

#include <filesystem>
#include <regex>

#include <gtest/gtest.h>

#include "rwsynth/report.hpp"
#include "test_util.hpp"

namespace rwsynth {
namespace {

RiskVector rv(std::vector<double> v) {
  RiskVector r;
  r.values = std::move(v);
  return r;
}

TEST(WhackAMoleTest, FlagsIncreasesAtOrAboveThreshold) {
  const auto base = rv({0.25, 0.5, 0.2, 0.9, 0.0});
  const auto weighted = rv({0.5, 0.1, 0.2, 0.95, 0.6});
  const auto rep = whack_a_mole(base, weighted, 0.25);
  ASSERT_EQ(rep.flagged.size(), 2u);
  EXPECT_EQ(rep.flagged[0].record, 0u);
  EXPECT_NEAR(rep.flagged[0].delta, 0.25, 1e-12);
  EXPECT_EQ(rep.flagged[1].record, 4u);
  EXPECT_DOUBLE_EQ(rep.decreased_share, 0.2);
  ASSERT_EQ(rep.counts_by_threshold.size(), whack_a_mole_grid().size());
  for (std::size_t k = 1; k < rep.counts_by_threshold.size(); ++k) {
    EXPECT_LE(rep.counts_by_threshold[k].second, rep.counts_by_threshold[k - 1].second);
  }
  EXPECT_EQ(rep.counts_by_threshold.front().second, 3u);
  const auto j = rep.to_json();
  EXPECT_EQ(j["flagged_count"], 2);
  EXPECT_THROW(whack_a_mole(base, rv({0.1}), 0.25), InputError);
}

TEST(TopcodeTest, CensorsAboveQuantileAndIsIdempotent) {
  std::vector<int> p(100);
  std::vector<double> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    p[i] = static_cast<int>(i % 2);
    y[i] = static_cast<double>(i + 1);
  }
  const auto ds = testing::make_dataset(p, y);
  const double t = topcode_threshold(ds, 0.94);
  EXPECT_NEAR(t, 1.0 + 0.94 * 99.0, 1e-9);
  const auto tc = topcode(ds, 0.94);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_LE(tc.record(i).y, t);
    if (y[i] > t) {
      ++censored;
      EXPECT_EQ(tc.record(i).y, t);
    } else {
      EXPECT_EQ(tc.record(i).y, y[i]);
    }
  }
  EXPECT_EQ(censored, 6u);
  EXPECT_EQ(topcode_at(tc, t).y(), tc.y());
  EXPECT_THROW(topcode_threshold(ds, 0.0), InputError);
}

TEST(ReportHelpersTest, JsonRoundTripAndTimestamp) {
  const auto dir = std::filesystem::temp_directory_path() / "rwsynth_report_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "x.json").string();
  nlohmann::ordered_json j;
  j["a"] = 1;
  j["b"] = {1.5, 2.5};
  write_json(path, j);
  const auto back = read_json(path);
  EXPECT_EQ(back["a"], 1);
  EXPECT_EQ(back["b"][1], 2.5);
  write_text(path, "{not json");
  EXPECT_THROW(read_json(path), InputError);
  EXPECT_THROW(read_json((dir / "missing.json").string()), IoError);
  EXPECT_TRUE(std::regex_match(utc_timestamp(),
                               std::regex(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)")));
  std::filesystem::remove_all(dir);
}

TEST(ReportHelpersTest, PerRecordCsvAndSummaryJson) {
  const auto ds = testing::make_dataset({0, 0}, {1, 2});
  const std::vector<double> a{0.5, 0.25};
  const auto csv = per_record_csv(ds, {{"risk", &a}});
  EXPECT_EQ(csv, "record,id,risk\n0,0,0.5\n1,1,0.25\n");
  const std::vector<double> bad{1.0};
  EXPECT_THROW(per_record_csv(ds, {{"x", &bad}}), InputError);
  const auto s = risk_summary(rv({0.0, 0.5, 1.0}));
  const auto j = to_json(s);
  EXPECT_EQ(j["median"], 0.5);
  EXPECT_EQ(j["quantiles"].size(), 99u);
}

}  // namespace
}  // namespace rwsynth
