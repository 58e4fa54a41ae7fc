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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rwsynth/pipeline.hpp"
#include "rwsynth/simulation.hpp"

namespace rwsynth {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Temporary workspace holding a CE fixture and a small, fast config.
class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("rwsynth_pipeline_" + std::string(::testing::UnitTest::GetInstance()
                                                  ->current_test_info()
                                                  ->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    data_ = generate_ce_fixture(240, 4);
    save_dataset((root_ / "data.csv").string(), data_);
  }
  void TearDown() override { fs::remove_all(root_); }

  nlohmann::json doc(const std::string& out) const {
    nlohmann::json d;
    d["input"] = "data.csv";
    d["schema"] = data_.schema().to_json();
    d["pattern_vars"] = {"Gender", "Age", "Region"};
    d["ball"] = {{"r", 0.2}};
    d["weights"] = {{"scheme", "marginal"}};
    d["synthesizer"] = {{"family", "mixture"},
                        {"predictors", {"Earner"}},
                        {"model_on_log", true},
                        {"mixture", {{"K", 3}, {"iterations", 300}, {"burn_in", 150}}}};
    d["L"] = 3;
    d["seed"] = 11;
    d["output_dir"] = out;
    d["evaluation"] = {{"bootstrap_B", 200},
                       {"statistics", {"mean", "median"}},
                       {"regression", {{"predictors", {"Earner"}}, {"column", "Earner"}, {"level", "2"}}}};
    return d;
  }

  RunConfig config(const std::string& out) const { return parse_run_config(doc(out), root_); }

  fs::path root_;
  Dataset data_ = generate_ce_fixture(kCeFixtureMinRows, 1);
};

/// Report without the fields that legitimately differ between runs.
nlohmann::json stable_report(const fs::path& dir) {
  auto j = read_json((dir / "report.json").string());
  j.erase("generated_at");
  j.erase("config");
  j.erase("files");
  return j;
}

TEST_F(PipelineTest, StagedRunEqualsOneShotPipeline) {
  const auto staged = config("staged");
  stage_risk(staged);
  stage_weights(staged);
  stage_synthesize(staged);
  EXPECT_EQ(stage_evaluate(staged), ExitCode::kOk);
  const auto oneshot = config("oneshot");
  EXPECT_EQ(run_pipeline(oneshot), ExitCode::kOk);
  for (const char* f : {"risk.csv", "weights.csv", "trace.csv", "synthetic_1.csv",
                        "synthetic_2.csv", "synthetic_3.csv", "utility.csv",
                        "risk_by_record.csv", "weights_by_scheme.csv"}) {
    EXPECT_EQ(slurp(root_ / "staged" / f), slurp(root_ / "oneshot" / f)) << f;
  }
  EXPECT_EQ(stable_report(root_ / "staged"), stable_report(root_ / "oneshot"));
  EXPECT_FALSE(fs::exists(root_ / "staged" / "synthetic_4.csv"));
}

TEST_F(PipelineTest, ReportIsDeterministicAndComplete) {
  EXPECT_EQ(run_pipeline(config("a")), ExitCode::kOk);
  EXPECT_EQ(run_pipeline(config("b")), ExitCode::kOk);
  EXPECT_EQ(stable_report(root_ / "a"), stable_report(root_ / "b"));
  const auto rep = read_json((root_ / "a" / "report.json").string());
  for (const char* key : {"tool", "version", "generated_at", "config", "seeds", "data", "synthesis",
                          "weights", "diagnostics", "risk", "utility", "risk_ceiling", "warnings",
                          "files"}) {
    EXPECT_TRUE(rep.contains(key)) << key;
  }
  EXPECT_EQ(rep["version"], kVersion);
  EXPECT_EQ(rep["data"]["n"], 240);
  const auto manifest = read_json((root_ / "a" / "manifest.json").string());
  EXPECT_EQ(manifest["L"], 3);
  EXPECT_EQ(manifest["draw_indices"].size(), 3u);
  // Synthetic files keep every non-sensitive column.
  const auto rel = load_release((root_ / "a" / "manifest.json").string(), data_.schema(), ',');
  ASSERT_EQ(rel.set.L(), 3u);
  for (const auto& d : rel.set.datasets) EXPECT_TRUE(is_partial_synthesis_of(d, data_));
}

TEST_F(PipelineTest, MarginalWeightsAreOneMinusRisk) {
  const auto cfg = config("w");
  stage_risk(cfg);
  stage_weights(cfg);
  const auto t = read_risk_table(OutputPaths{cfg.output_dir}.risk(), data_);
  const auto wv = read_weights(OutputPaths{cfg.output_dir}, data_, cfg);
  ASSERT_EQ(wv.values.size(), data_.n());
  for (std::size_t i = 0; i < data_.n(); ++i) {
    EXPECT_NEAR(wv.values[i], 1.0 - t.marginal[i], 1e-12);
  }
  // c = 1, g = 0 leaves the weights unchanged.
  auto d = doc("w_identity");
  d["weights"] = {{"scheme", "marginal"}, {"c", 1.0}, {"g", 0.0}};
  const auto same = weights_from_risk_table(parse_run_config(d, root_), t);
  EXPECT_EQ(same.values, wv.values);
  // The unit scheme gives every record weight one.
  d["weights"] = {{"scheme", "unit"}};
  const auto unit = weights_from_risk_table(parse_run_config(d, root_), t);
  for (double v : unit.values) EXPECT_EQ(v, 1.0);
}

TEST_F(PipelineTest, WeightsFileMustMatchConfig) {
  const auto cfg = config("prov");
  stage_risk(cfg);
  stage_weights(cfg);
  auto d = doc("prov");
  d["weights"] = {{"scheme", "pairwise"}};
  EXPECT_THROW(stage_synthesize(parse_run_config(d, root_)), InputError);
}

TEST_F(PipelineTest, MissingStageInputsAreReported) {
  const auto cfg = config("empty");
  EXPECT_THROW(stage_synthesize(cfg), IoError);
  EXPECT_THROW(stage_evaluate(cfg), IoError);
  // Without risk.csv the weight stage recomputes the risks itself.
  EXPECT_NO_THROW(stage_weights(cfg));
  EXPECT_TRUE(fs::exists(root_ / "empty" / "weights.csv"));
}

TEST_F(PipelineTest, RiskCeilingViolation) {
  auto d = doc("ceiling");
  d["risk_ceiling"] = 0.0;
  EXPECT_EQ(run_pipeline(parse_run_config(d, root_)), ExitCode::kRiskCeiling);
  const auto rep = read_json((root_ / "ceiling" / "report.json").string());
  EXPECT_EQ(rep["risk_ceiling"]["violated"], true);
}

TEST(OutputLockTest, SecondLockFailsUntilReleased) {
  const auto dir = fs::temp_directory_path() / "rwsynth_lock_test";
  fs::remove_all(dir);
  {
    OutputLock a(dir);
    EXPECT_TRUE(fs::exists(dir / ".rwsynth.lock"));
    EXPECT_THROW(OutputLock b(dir), IoError);
  }
  EXPECT_FALSE(fs::exists(dir / ".rwsynth.lock"));
  EXPECT_NO_THROW(OutputLock c(dir));
  fs::remove_all(dir);
}

// ----------------------------------------------------------------------- CLI

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RWSYNTH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rwsynth_cli_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string d() const { return dir_.string(); }
  fs::path dir_;
};

TEST_F(CliTest, SimulateThenStagedCommands) {
  ASSERT_EQ(run_cli("simulate --kind nb -n 150 --seed 3 -o " + d()), 0);
  ASSERT_TRUE(fs::exists(dir_ / "data.csv"));
  ASSERT_TRUE(fs::exists(dir_ / "config.json"));
  auto cfg = read_json((dir_ / "config.json").string());
  cfg["synthesizer"]["negative_binomial"] = {{"iterations", 400}, {"burn_in", 200}};
  cfg["evaluation"]["bootstrap_B"] = 200;
  write_json((dir_ / "config.json").string(), cfg);
  const std::string c = "-c " + d() + "/config.json -L 4";
  EXPECT_EQ(run_cli("risk " + c), 0);
  EXPECT_EQ(run_cli("weights " + c), 0);
  EXPECT_EQ(run_cli("synthesize " + c), 0);
  EXPECT_EQ(run_cli("evaluate " + c), 0);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "report.json"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "synthetic_4.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "run" / ".rwsynth.lock"));
  // One-shot into a second directory gives the same synthetic data.
  EXPECT_EQ(run_cli("pipeline " + c + " -o " + d() + "/oneshot"), 0);
  EXPECT_EQ(slurp(dir_ / "run" / "synthetic_2.csv"), slurp(dir_ / "oneshot" / "synthetic_2.csv"));
}

TEST_F(CliTest, ExitCodes) {
  ASSERT_EQ(run_cli("simulate --kind nb -n 100 -o " + d()), 0);
  auto cfg = read_json((dir_ / "config.json").string());
  cfg["synthesizer"]["negative_binomial"] = {{"iterations", 300}, {"burn_in", 100}};
  cfg["evaluation"]["bootstrap_B"] = 200;
  write_json((dir_ / "config.json").string(), cfg);
  const std::string c = " -c " + d() + "/config.json";
  // Usage and configuration problems.
  EXPECT_EQ(run_cli("bogus"), 2);
  EXPECT_EQ(run_cli("risk"), 2);
  EXPECT_EQ(run_cli("risk" + c + " -r 2"), 2);
  EXPECT_EQ(run_cli("risk" + c + " --scheme nonsense"), 2);
  // I/O problems.
  EXPECT_EQ(run_cli("risk -c " + d() + "/nope.json"), 1);
  EXPECT_EQ(run_cli("risk" + c + " --input " + d() + "/nope.csv"), 1);
  EXPECT_EQ(run_cli("evaluate" + c + " -o " + d() + "/fresh"), 1);
  // A held lock refuses a second run.
  fs::create_directories(dir_ / "run");
  { std::ofstream(dir_ / "run" / ".rwsynth.lock") << "1\n"; }
  EXPECT_EQ(run_cli("risk" + c), 1);
  fs::remove(dir_ / "run" / ".rwsynth.lock");
  // Risk ceiling.
  EXPECT_EQ(run_cli("pipeline" + c + " -L 2 --risk-ceiling 0"), 3);
  EXPECT_EQ(run_cli("--version"), 0);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  ASSERT_EQ(run_cli("simulate --kind nb -n 100 -o " + d()), 0);
  auto cfg = read_json((dir_ / "config.json").string());
  cfg.erase("output_dir");
  write_json((dir_ / "config.json").string(), cfg);
  const std::string env = "RWSYNTH_OUTPUT_DIR=" + d() + "/envout ";
  const std::string cmd = env + RWSYNTH_CLI + " risk -c " + d() + "/config.json >/dev/null 2>&1";
  EXPECT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
  EXPECT_TRUE(fs::exists(dir_ / "envout" / "risk.csv"));
}

}  // namespace
}  // namespace rwsynth
