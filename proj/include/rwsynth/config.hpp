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

// Run configuration: one JSON document describing input, risk, weights,
// synthesizer, evaluation and seeds. Parse errors name the offending field
// by its path (for example "weights.c: expected a number").

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "rwsynth/data_model.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/mixture_sampler.hpp"
#include "rwsynth/nb_sampler.hpp"
#include "rwsynth/report.hpp"
#include "rwsynth/risk.hpp"
#include "rwsynth/rng.hpp"
#include "rwsynth/utility.hpp"
#include "rwsynth/weights.hpp"

namespace rwsynth {

namespace detail {

/// Typed access to one JSON object that remembers its path and rejects keys
/// nobody asked for.
class JsonReader {
 public:
  JsonReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw InputError(where() + "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  /// True when the key is present with an explicit null.
  bool raw_is_null(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && obj_.at(key).is_null();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw InputError(field(key) + ": expected a number");
    return v.get<double>();
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key, 0.0);
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_number_integer()) throw InputError(field(key) + ": expected an integer");
    return v.get<long long>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) {
      return static_cast<std::uint64_t>(v.get<long long>());
    }
    throw InputError(field(key) + ": expected a nonnegative integer");
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw InputError(field(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw InputError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_array()) throw InputError(field(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& s : v) {
      if (!s.is_string()) throw InputError(field(key) + ": expected an array of strings");
      out.push_back(s.get<std::string>());
    }
    return out;
  }

  /// Nested object reader, or nullopt when the key is absent.
  std::optional<JsonReader> child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return JsonReader(obj_.at(key), field(key));
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw InputError(field(k) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Rethrows config-level InputErrors with the field path prefixed.
template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace detail

enum class SynthFamily { kMixture, kNegativeBinomial };

inline std::string_view to_string(SynthFamily f) {
  return f == SynthFamily::kMixture ? "mixture" : "negative_binomial";
}

struct RegressionSpec {
  std::vector<std::string> predictors;
  std::string column;
  std::string level;
};

struct EvaluationConfig {
  std::size_t bootstrap_B = 1000;
  std::vector<std::string> statistics{"mean", "median", "quantile:0.9"};
  std::optional<RegressionSpec> regression;
  double whack_a_mole_threshold = 0.25;
  std::optional<std::string> baseline_manifest;
  std::optional<double> topcode_quantile = 0.94;
};

/// Named RNG substreams. Unset entries derive from the master seed.
struct SeedConfig {
  std::uint64_t master = 20260101;
  std::optional<std::uint64_t> fit, synthesis, bootstrap, simulation;

  std::uint64_t effective(std::string_view name) const {
    const std::optional<std::uint64_t>* o = nullptr;
    if (name == "fit") o = &fit;
    else if (name == "synthesis") o = &synthesis;
    else if (name == "bootstrap") o = &bootstrap;
    else if (name == "simulation") o = &simulation;
    else throw std::invalid_argument("unknown seed stream");
    return o->has_value() ? **o : derive_seed(master, name, 0);
  }
};

struct RunConfig {
  std::string input;
  char delimiter = ',';
  Schema schema;
  std::vector<std::string> pattern_vars;
  BallConfig ball;
  SingletonPolicy singleton_policy = SingletonPolicy::kError;
  WeightScheme scheme = WeightScheme::kUnit;
  double c = 1.0;
  double g = 0.0;
  double weight_floor = 0.0;
  SynthFamily family = SynthFamily::kMixture;
  std::vector<std::string> predictors;
  bool model_on_log = false;
  MixtureConfig mixture;
  NBConfig negative_binomial;
  std::size_t L = 20;
  SeedConfig seeds;
  std::string output_dir = "rwsynth-out";
  std::optional<double> risk_ceiling;
  EvaluationConfig evaluation;

  /// Adjustment applies only when (c, g) differs from the identity (1, 0).
  bool adjusts_weights() const { return !(c == 1.0 && g == 0.0); }

  nlohmann::ordered_json to_json() const;
};

inline std::string_view to_string(NegativeCenterPolicy p) {
  return p == NegativeCenterPolicy::kAbsoluteRadius ? "absolute_radius" : "reject";
}

inline std::string_view to_string(SingletonPolicy p) {
  return p == SingletonPolicy::kError ? "error" : "floor";
}

inline nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["input"] = input;
  j["delimiter"] = std::string(1, delimiter);
  j["schema"] = schema.to_json();
  j["pattern_vars"] = pattern_vars;
  j["ball"] = {{"r", ball.r},
               {"negative_center_policy", to_string(ball.negative_center_policy)},
               {"zero_center_epsilon", ball.zero_center_epsilon}};
  j["singleton_policy"] = to_string(singleton_policy);
  j["weights"] = {{"scheme", to_string(scheme)}, {"c", c}, {"g", g}, {"floor", weight_floor}};
  nlohmann::ordered_json s;
  s["family"] = to_string(family);
  s["predictors"] = predictors;
  s["model_on_log"] = model_on_log;
  auto mix = mixture.to_json();
  mix.erase("seed");
  auto nb = negative_binomial.to_json();
  nb.erase("seed");
  s["mixture"] = mix;
  s["negative_binomial"] = nb;
  j["synthesizer"] = s;
  j["L"] = L;
  j["seed"] = seeds.master;
  j["seeds"] = {{"fit", seeds.effective("fit")},
                {"synthesis", seeds.effective("synthesis")},
                {"bootstrap", seeds.effective("bootstrap")},
                {"simulation", seeds.effective("simulation")}};
  j["output_dir"] = output_dir;
  j["risk_ceiling"] = risk_ceiling ? nlohmann::ordered_json(*risk_ceiling) : nlohmann::ordered_json();
  nlohmann::ordered_json e;
  e["bootstrap_B"] = evaluation.bootstrap_B;
  e["statistics"] = evaluation.statistics;
  if (evaluation.regression) {
    e["regression"] = {{"predictors", evaluation.regression->predictors},
                       {"column", evaluation.regression->column},
                       {"level", evaluation.regression->level}};
  } else {
    e["regression"] = nullptr;
  }
  e["whack_a_mole_threshold"] = evaluation.whack_a_mole_threshold;
  e["baseline_manifest"] = evaluation.baseline_manifest
                               ? nlohmann::ordered_json(*evaluation.baseline_manifest)
                               : nlohmann::ordered_json();
  e["topcode_quantile"] = evaluation.topcode_quantile
                              ? nlohmann::ordered_json(*evaluation.topcode_quantile)
                              : nlohmann::ordered_json();
  j["evaluation"] = e;
  return j;
}

namespace detail {

inline MixtureConfig parse_mixture(JsonReader r) {
  MixtureConfig m;
  m.K = static_cast<int>(r.integer("K", m.K));
  m.a_gamma = r.number("a_gamma", m.a_gamma);
  m.b_gamma = r.number("b_gamma", m.b_gamma);
  m.beta_prior_scale = r.number("beta_prior_scale", m.beta_prior_scale);
  m.sigma_prior_df = r.number("sigma_prior_df", m.sigma_prior_df);
  m.sigma_prior_scale = r.number("sigma_prior_scale", m.sigma_prior_scale);
  m.fixed_sigma = r.optional_number("fixed_sigma");
  m.iterations = static_cast<int>(r.integer("iterations", m.iterations));
  m.burn_in = static_cast<int>(r.integer("burn_in", m.burn_in));
  m.thin = static_cast<int>(r.integer("thin", m.thin));
  m.chains = static_cast<int>(r.integer("chains", m.chains));
  m.rhat_warning = r.number("rhat_warning", m.rhat_warning);
  r.finish();
  return m;
}

inline NBConfig parse_nb(JsonReader r) {
  NBConfig m;
  m.log_mu_prior_mean = r.number("log_mu_prior_mean", m.log_mu_prior_mean);
  m.log_mu_prior_sd = r.number("log_mu_prior_sd", m.log_mu_prior_sd);
  m.log_phi_prior_mean = r.number("log_phi_prior_mean", m.log_phi_prior_mean);
  m.log_phi_prior_sd = r.number("log_phi_prior_sd", m.log_phi_prior_sd);
  m.mu_step = r.number("mu_step", m.mu_step);
  m.phi_step = r.number("phi_step", m.phi_step);
  m.adapt = r.boolean("adapt", m.adapt);
  m.iterations = static_cast<int>(r.integer("iterations", m.iterations));
  m.burn_in = static_cast<int>(r.integer("burn_in", m.burn_in));
  m.thin = static_cast<int>(r.integer("thin", m.thin));
  m.chains = static_cast<int>(r.integer("chains", m.chains));
  m.rhat_warning = r.number("rhat_warning", m.rhat_warning);
  r.finish();
  return m;
}

}  // namespace detail

/// Parses and validates a run configuration. Relative paths (input, schema
/// file, output_dir, baseline_manifest) resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {}) {
  namespace fs = std::filesystem;
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return (path.is_absolute() || base_dir.empty()) ? p : (base_dir / path).lexically_normal().string();
  };
  detail::JsonReader r(doc, "");
  RunConfig cfg;
  if (!r.has("input")) throw InputError("input: required field is missing");
  cfg.input = resolve(r.string("input", ""));
  const std::string delim = r.string("delimiter", ",");
  if (delim.size() != 1) throw InputError("delimiter: expected a single character");
  cfg.delimiter = delim[0];

  if (!r.has("schema")) throw InputError("schema: required field is missing");
  {
    nlohmann::json sdoc = r.raw("schema");
    if (sdoc.is_string()) {
      sdoc = read_json(resolve(sdoc.get<std::string>()));
      if (sdoc.contains("schema")) sdoc = sdoc["schema"];
    }
    cfg.schema = Schema::from_json(sdoc);
  }
  cfg.pattern_vars = r.strings("pattern_vars", cfg.schema.pattern_columns());
  for (const auto& v : cfg.pattern_vars) {
    const auto c = cfg.schema.find(v);
    if (!c) throw InputError("pattern_vars: '" + v + "' is not a schema column");
    if (!cfg.schema.column(*c).is_categorical()) {
      throw InputError("pattern_vars: '" + v + "' is not categorical");
    }
  }
  if (cfg.pattern_vars.empty()) throw InputError("pattern_vars: at least one pattern variable");

  if (auto b = r.child("ball")) {
    cfg.ball.r = b->number("r", cfg.ball.r);
    const auto pol = b->string("negative_center_policy", "absolute_radius");
    if (pol == "absolute_radius") cfg.ball.negative_center_policy = NegativeCenterPolicy::kAbsoluteRadius;
    else if (pol == "reject") cfg.ball.negative_center_policy = NegativeCenterPolicy::kReject;
    else throw InputError("ball.negative_center_policy: expected absolute_radius or reject");
    cfg.ball.zero_center_epsilon = b->number("zero_center_epsilon", 0.0);
    b->finish();
  }
  if (!(cfg.ball.r > 0.0 && cfg.ball.r < 1.0)) throw InputError("ball.r: must lie in (0, 1)");
  detail::with_path("ball", [&] { cfg.ball.validate(); return 0; });

  const auto sp = r.string("singleton_policy", "error");
  if (sp == "error") cfg.singleton_policy = SingletonPolicy::kError;
  else if (sp == "floor") cfg.singleton_policy = SingletonPolicy::kFloor;
  else throw InputError("singleton_policy: expected error or floor");

  if (auto w = r.child("weights")) {
    cfg.scheme = detail::with_path("weights.scheme",
                                   [&] { return parse_weight_scheme(w->string("scheme", "unit")); });
    cfg.c = w->number("c", 1.0);
    cfg.g = w->number("g", 0.0);
    cfg.weight_floor = w->number("floor", 0.0);
    w->finish();
  }
  if (!(cfg.c >= 0.0)) throw InputError("weights.c: must be >= 0");
  if (!(cfg.weight_floor >= 0.0 && cfg.weight_floor < 1.0)) {
    throw InputError("weights.floor: must lie in [0, 1)");
  }

  if (auto s = r.child("synthesizer")) {
    const auto fam = s->string("family", "mixture");
    if (fam == "mixture") cfg.family = SynthFamily::kMixture;
    else if (fam == "negative_binomial") cfg.family = SynthFamily::kNegativeBinomial;
    else throw InputError("synthesizer.family: expected mixture or negative_binomial");
    std::vector<std::string> default_predictors;
    for (const auto& col : cfg.schema.columns()) {
      if (col.role == ColumnRole::kPredictor && col.is_categorical()) {
        default_predictors.push_back(col.name);
      }
    }
    cfg.predictors = s->strings("predictors", default_predictors);
    cfg.model_on_log = s->boolean("model_on_log", false);
    if (auto m = s->child("mixture")) cfg.mixture = detail::parse_mixture(*m);
    if (auto m = s->child("negative_binomial")) cfg.negative_binomial = detail::parse_nb(*m);
    s->finish();
  } else {
    for (const auto& col : cfg.schema.columns()) {
      if (col.role == ColumnRole::kPredictor && col.is_categorical()) cfg.predictors.push_back(col.name);
    }
  }
  for (const auto& p : cfg.predictors) {
    const auto c = cfg.schema.find(p);
    if (!c || !cfg.schema.column(*c).is_categorical()) {
      throw InputError("synthesizer.predictors: '" + p + "' is not a categorical column");
    }
  }
  detail::with_path("synthesizer.mixture", [&] { cfg.mixture.validate(); return 0; });
  detail::with_path("synthesizer.negative_binomial", [&] { cfg.negative_binomial.validate(); return 0; });
  if (cfg.family == SynthFamily::kNegativeBinomial && cfg.model_on_log) {
    throw InputError("synthesizer.model_on_log: not available for the negative_binomial family");
  }

  const long long L = r.integer("L", 20);
  if (L < 1) throw InputError("L: must be >= 1");
  cfg.L = static_cast<std::size_t>(L);

  cfg.seeds.master = r.seed("seed", cfg.seeds.master);
  if (auto s = r.child("seeds")) {
    for (const char* name : {"fit", "synthesis", "bootstrap", "simulation"}) {
      if (s->has(name)) {
        const auto v = s->seed(name, 0);
        if (std::string_view(name) == "fit") cfg.seeds.fit = v;
        else if (std::string_view(name) == "synthesis") cfg.seeds.synthesis = v;
        else if (std::string_view(name) == "bootstrap") cfg.seeds.bootstrap = v;
        else cfg.seeds.simulation = v;
      }
    }
    s->finish();
  }
  cfg.mixture.seed = cfg.seeds.effective("fit");
  cfg.negative_binomial.seed = cfg.seeds.effective("fit");

  cfg.output_dir = resolve(r.string("output_dir", cfg.output_dir));
  cfg.risk_ceiling = r.optional_number("risk_ceiling");
  if (cfg.risk_ceiling && !(*cfg.risk_ceiling >= 0.0 && *cfg.risk_ceiling <= 1.0)) {
    throw InputError("risk_ceiling: must lie in [0, 1]");
  }

  if (auto e = r.child("evaluation")) {
    const long long B = e->integer("bootstrap_B", 1000);
    if (B < static_cast<long long>(kMinBootstrapReplicates)) {
      throw InputError("evaluation.bootstrap_B: must be >= " +
                       std::to_string(kMinBootstrapReplicates));
    }
    cfg.evaluation.bootstrap_B = static_cast<std::size_t>(B);
    cfg.evaluation.statistics = e->strings("statistics", cfg.evaluation.statistics);
    for (const auto& s : cfg.evaluation.statistics) {
      detail::with_path("evaluation.statistics", [&] { return Statistic::parse(s); });
    }
    if (auto g = e->child("regression")) {
      RegressionSpec spec;
      spec.predictors = g->strings("predictors", cfg.predictors);
      spec.column = g->string("column", "");
      spec.level = g->string("level", "");
      if (spec.column.empty() || spec.level.empty()) {
        throw InputError("evaluation.regression: column and level are required");
      }
      if (std::find(spec.predictors.begin(), spec.predictors.end(), spec.column) ==
          spec.predictors.end()) {
        throw InputError("evaluation.regression.column: must be one of the regression predictors");
      }
      g->finish();
      cfg.evaluation.regression = spec;
    }
    cfg.evaluation.whack_a_mole_threshold = e->number("whack_a_mole_threshold", 0.25);
    if (e->has("baseline_manifest")) {
      cfg.evaluation.baseline_manifest = resolve(e->string("baseline_manifest", ""));
    }
    if (e->has("topcode_quantile")) {
      cfg.evaluation.topcode_quantile = e->number("topcode_quantile", 0.94);
      if (!(*cfg.evaluation.topcode_quantile > 0.0 && *cfg.evaluation.topcode_quantile < 1.0)) {
        throw InputError("evaluation.topcode_quantile: must lie in (0, 1)");
      }
    } else if (e->raw_is_null("topcode_quantile")) {
      cfg.evaluation.topcode_quantile.reset();
    }
    e->finish();
  }
  r.finish();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  const auto doc = read_json(path);
  return parse_run_config(doc, std::filesystem::path(path).parent_path());
}

}  // namespace rwsynth
