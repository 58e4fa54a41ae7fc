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

// Command-line front end: simulate, risk, weights, synthesize, evaluate and
// pipeline. Exit codes: 0 success, 1 I/O failure, 2 configuration or input
// error, 3 risk ceiling exceeded, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rwsynth/rwsynth.hpp"

namespace {

namespace fs = std::filesystem;
using rwsynth::ExitCode;

/// Flags shared by every config-driven subcommand. Set flags override the
/// corresponding config fields.
struct Overrides {
  std::string config;
  std::optional<std::string> input;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<long long> L;
  std::optional<double> r;
  std::optional<std::string> scheme;
  std::optional<double> c;
  std::optional<double> g;
  std::optional<double> floor;
  std::optional<std::string> family;
  std::optional<double> risk_ceiling;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Run configuration (JSON)")->required();
  cmd->add_option("--input", o.input, "Override: input data file");
  cmd->add_option("-o,--output-dir", o.output_dir, "Override: output directory");
  cmd->add_option("--seed", o.seed, "Override: master seed");
  cmd->add_option("-L,--datasets", o.L, "Override: number of synthetic datasets");
  cmd->add_option("-r,--radius", o.r, "Override: ball radius fraction r");
  cmd->add_option("--scheme", o.scheme, "Override: weight scheme (unit, marginal, pairwise)");
  cmd->add_option("--scale-c", o.c, "Override: weight scale c");
  cmd->add_option("--shift-g", o.g, "Override: weight shift g");
  cmd->add_option("--floor", o.floor, "Override: weight floor");
  cmd->add_option("--family", o.family, "Override: synthesizer family (mixture, negative_binomial)");
  cmd->add_option("--risk-ceiling", o.risk_ceiling, "Override: maximum allowed synthetic risk");
}

rwsynth::RunConfig load_config(const Overrides& o) {
  nlohmann::json doc = rwsynth::read_json(o.config);
  const fs::path base = fs::path(o.config).parent_path();
  auto cwd_path = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
  if (o.input) doc["input"] = cwd_path(*o.input);
  if (o.output_dir) {
    doc["output_dir"] = cwd_path(*o.output_dir);
  } else if (!doc.contains("output_dir")) {
    if (const char* env = std::getenv("RWSYNTH_OUTPUT_DIR"); env && *env) {
      doc["output_dir"] = cwd_path(env);
    }
  }
  if (o.seed) doc["seed"] = *o.seed;
  if (o.L) doc["L"] = *o.L;
  if (o.r) doc["ball"]["r"] = *o.r;
  if (o.scheme) doc["weights"]["scheme"] = *o.scheme;
  if (o.c) doc["weights"]["c"] = *o.c;
  if (o.g) doc["weights"]["g"] = *o.g;
  if (o.floor) doc["weights"]["floor"] = *o.floor;
  if (o.family) doc["synthesizer"]["family"] = *o.family;
  if (o.risk_ceiling) doc["risk_ceiling"] = *o.risk_ceiling;
  return rwsynth::parse_run_config(doc, base);
}

std::string default_output_dir() {
  const char* env = std::getenv("RWSYNTH_OUTPUT_DIR");
  return env && *env ? env : "rwsynth-out";
}

/// Writes a simulated dataset, its generator spec and a starter config.
void run_simulate(const std::string& kind, std::size_t n, std::uint64_t seed,
                  const std::vector<double>& theta, const std::vector<double>& mu,
                  const std::vector<double>& phi, const std::string& out_dir) {
  rwsynth::OutputLock lock(out_dir);
  const fs::path dir(out_dir);
  nlohmann::ordered_json spec;
  nlohmann::ordered_json config;
  std::optional<rwsynth::Dataset> ds;
  config["input"] = "data.csv";
  if (kind == "nb") {
    rwsynth::NBMixtureSpec s;
    s.n = n;
    s.seed = seed;
    if (!theta.empty()) s.theta = {theta.at(0), theta.at(1)};
    if (!mu.empty()) s.mu = {mu.at(0), mu.at(1)};
    if (!phi.empty()) s.phi = {phi.at(0), phi.at(1)};
    ds = rwsynth::generate_nb_mixture(s);
    spec["kind"] = "nb_mixture";
    spec["spec"] = s.to_json();
    config["schema"] = ds->schema().to_json();
    config["pattern_vars"] = {"All"};
    config["synthesizer"] = {{"family", "negative_binomial"}, {"predictors", nlohmann::json::array()}};
    config["evaluation"] = {{"statistics", {"mean", "median", "quantile:0.9"}}};
  } else if (kind == "ce") {
    ds = rwsynth::generate_ce_fixture(n, seed);
    spec["kind"] = "ce_fixture";
    spec["spec"] = {{"n", n}, {"seed", seed}};
    config["schema"] = ds->schema().to_json();
    config["pattern_vars"] = {"Gender", "Age", "Region"};
    config["synthesizer"] = {{"family", "mixture"},
                             {"predictors", {"Education", "Urban", "Earner"}},
                             {"model_on_log", true}};
    config["evaluation"] = {
        {"statistics", {"mean", "median", "quantile:0.9"}},
        {"regression", {{"predictors", {"Education", "Urban", "Earner"}},
                        {"column", "Earner"},
                        {"level", "2"}}}};
  } else {
    throw rwsynth::InputError("--kind must be nb or ce");
  }
  spec["schema"] = ds->schema().to_json();
  config["ball"] = {{"r", 0.2}};
  config["weights"] = {{"scheme", "marginal"}};
  config["L"] = 20;
  config["seed"] = seed;
  config["output_dir"] = "run";
  rwsynth::save_dataset((dir / "data.csv").string(), *ds);
  rwsynth::write_json((dir / "spec.json").string(), spec);
  rwsynth::write_json((dir / "config.json").string(), config);
  std::cout << "wrote " << ds->n() << " records to " << (dir / "data.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-weighted Bayesian data synthesis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rwsynth::kVersion);

  std::string kind = "nb";
  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 1;
  std::vector<double> theta, mu, phi;
  std::string sim_out = default_output_dir();
  auto* simulate = app.add_subcommand("simulate", "Write a simulated dataset and a starter config");
  simulate->add_option("--kind", kind, "nb (negative binomial mixture) or ce (survey fixture)")
      ->check(CLI::IsMember({"nb", "ce"}));
  simulate->add_option("-n,--records", sim_n, "Number of records");
  simulate->add_option("--seed", sim_seed, "Seed");
  simulate->add_option("--theta", theta, "Mixture weights (two values)")->expected(2);
  simulate->add_option("--mu", mu, "Component means (two values)")->expected(2);
  simulate->add_option("--phi", phi, "Component dispersions (two values)")->expected(2);
  simulate->add_option("-o,--output-dir", sim_out, "Output directory");

  Overrides o_risk, o_weights, o_synth, o_eval, o_pipe;
  auto* risk = app.add_subcommand("risk", "Confidential marginal and pairwise risks to risk.csv");
  add_common(risk, o_risk);
  std::optional<std::string> risk_file;
  auto* weights = app.add_subcommand("weights", "Weights from risk.csv or recomputed risks");
  add_common(weights, o_weights);
  weights->add_option("--risk", risk_file, "Risk table to read instead of <output>/risk.csv");
  auto* synth = app.add_subcommand("synthesize", "Fit the pseudo posterior and write L datasets");
  add_common(synth, o_synth);
  std::optional<std::string> manifest, baseline;
  auto* evaluate = app.add_subcommand("evaluate", "Score a release and write report.json");
  add_common(evaluate, o_eval);
  evaluate->add_option("--manifest", manifest, "Manifest of the release (default <output>/manifest.json)");
  evaluate->add_option("--baseline", baseline, "Manifest of a baseline release for whack-a-mole");
  auto* pipeline = app.add_subcommand("pipeline", "risk, weights, synthesize and evaluate");
  add_common(pipeline, o_pipe);
  pipeline->add_option("--baseline", baseline, "Manifest of a baseline release for whack-a-mole");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kConfig);
  }

  try {
    auto with_config = [&](const Overrides& o, bool with_baseline) {
      auto cfg = load_config(o);
      if (with_baseline && baseline) {
        cfg.evaluation.baseline_manifest = fs::absolute(*baseline).lexically_normal().string();
      }
      return cfg;
    };
    ExitCode code = ExitCode::kOk;
    if (simulate->parsed()) {
      run_simulate(kind, sim_n, sim_seed, theta, mu, phi, sim_out);
    } else if (risk->parsed()) {
      const auto cfg = with_config(o_risk, false);
      rwsynth::OutputLock lock(cfg.output_dir);
      rwsynth::stage_risk(cfg);
    } else if (weights->parsed()) {
      const auto cfg = with_config(o_weights, false);
      rwsynth::OutputLock lock(cfg.output_dir);
      rwsynth::stage_weights(cfg, risk_file);
    } else if (synth->parsed()) {
      const auto cfg = with_config(o_synth, false);
      rwsynth::OutputLock lock(cfg.output_dir);
      rwsynth::stage_synthesize(cfg);
    } else if (evaluate->parsed()) {
      const auto cfg = with_config(o_eval, true);
      rwsynth::OutputLock lock(cfg.output_dir);
      code = rwsynth::stage_evaluate(cfg, manifest);
    } else if (pipeline->parsed()) {
      const auto cfg = with_config(o_pipe, true);
      rwsynth::OutputLock lock(cfg.output_dir);
      code = rwsynth::run_pipeline(cfg);
    }
    if (code == ExitCode::kRiskCeiling) {
      std::cerr << "rwsynth: risk ceiling exceeded (see report.json)\n";
    }
    return static_cast<int>(code);
  } catch (const rwsynth::Error& e) {
    std::cerr << "rwsynth: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "rwsynth: malformed JSON document: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfig);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "rwsynth: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  } catch (const std::exception& e) {
    std::cerr << "rwsynth: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }
}
