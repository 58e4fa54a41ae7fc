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

// End-to-end stages: confidential risk -> weights -> fit and synthesize ->
// evaluate and report. Every stage reads its inputs from, and writes its
// outputs to, the run's output directory, so running the stages one by one
// produces the same files as running them in one go.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rwsynth/config.hpp"
#include "rwsynth/data_model.hpp"
#include "rwsynth/design.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/mixture_sampler.hpp"
#include "rwsynth/nb_sampler.hpp"
#include "rwsynth/report.hpp"
#include "rwsynth/risk.hpp"
#include "rwsynth/synth.hpp"
#include "rwsynth/utility.hpp"
#include "rwsynth/weights.hpp"

namespace rwsynth {

inline constexpr const char* kVersion = "1.0.0";

/// File layout of one output directory.
struct OutputPaths {
  std::filesystem::path dir;

  std::string risk() const { return (dir / "risk.csv").string(); }
  std::string weights() const { return (dir / "weights.csv").string(); }
  std::string weights_meta() const { return (dir / "weights.json").string(); }
  std::string manifest() const { return (dir / "manifest.json").string(); }
  std::string trace() const { return (dir / "trace.csv").string(); }
  std::string report() const { return (dir / "report.json").string(); }
  std::string risk_by_record() const { return (dir / "risk_by_record.csv").string(); }
  std::string weights_by_scheme() const { return (dir / "weights_by_scheme.csv").string(); }
  std::string utility() const { return (dir / "utility.csv").string(); }
  std::string lock() const { return (dir / ".rwsynth.lock").string(); }
  static std::string synthetic_name(std::size_t l) {
    return "synthetic_" + std::to_string(l + 1) + ".csv";
  }
};

/// Exclusive claim on an output directory for the lifetime of the object.
/// Creation fails if another run holds the lock.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    path_ = (dir / ".rwsynth.lock").string();
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw IoError("output directory '" + dir.string() + "' is locked by another run (remove " +
                    path_ + " if it is stale)");
    }
    std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
    std::fclose(f);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;
  ~OutputLock() { std::remove(path_.c_str()); }

 private:
  std::string path_;
};

inline Dataset load_input(const RunConfig& cfg) {
  return load_dataset(cfg.input, cfg.schema, CsvOptions{cfg.delimiter});
}

// ---------------------------------------------------------------- risk stage

/// Confidential marginal risk and mean pairwise risk per record.
struct RiskTable {
  std::vector<std::size_t> pattern;
  std::vector<std::size_t> group_size;
  std::vector<double> marginal;
  std::vector<double> pairwise_mean;  // NaN for singleton records
  std::vector<std::size_t> singletons;

  std::size_t n() const { return marginal.size(); }
};

inline RiskTable compute_risk_table(const Dataset& ds, const PatternIndex& idx,
                                    const RunConfig& cfg) {
  RiskTable t;
  const auto rv = marginal_risk_confidential(ds, idx, cfg.ball, cfg.singleton_policy);
  const auto pm = pairwise_risk_confidential(ds, idx, cfg.ball, cfg.singleton_policy);
  t.marginal = rv.values;
  t.pairwise_mean = pairwise_mean_risks(pm);
  t.singletons = rv.singletons;
  t.pattern.resize(ds.n());
  t.group_size.resize(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    t.pattern[i] = idx.group_of(i);
    t.group_size[i] = idx.group_size_of(i);
  }
  return t;
}

inline void write_risk_table(const std::string& path, const Dataset& ds, const RiskTable& t) {
  std::ostringstream os;
  os << "record,id,pattern,group_size,singleton,marginal_risk,pairwise_mean_risk\n";
  for (std::size_t i = 0; i < t.n(); ++i) {
    const bool single = t.group_size[i] < 2;
    os << i << ',' << csv::quote_if_needed(record_label(ds, i), ',') << ',' << t.pattern[i] << ','
       << t.group_size[i] << ',' << (single ? 1 : 0) << ',' << csv::format_double(t.marginal[i])
       << ',' << (std::isnan(t.pairwise_mean[i]) ? "" : csv::format_double(t.pairwise_mean[i]))
       << '\n';
  }
  write_text(path, os.str());
}

namespace detail {

/// Reads a CSV written by this module: checks the header and row count and
/// returns the fields of each data row.
inline std::vector<std::vector<std::string>> read_table(const std::string& path,
                                                        const std::string& header,
                                                        std::size_t expected_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw InputError(path + ": unexpected header (expected '" + header + "')");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(csv::split_line(line, ','));
  }
  if (rows.size() != expected_rows) {
    throw InputError(path + ": has " + std::to_string(rows.size()) + " rows, the input has " +
                     std::to_string(expected_rows) + " records");
  }
  return rows;
}

inline double field_double(const std::string& path, std::size_t row, const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto v = csv::parse_double(s);
  if (!v) throw InputError(path + ": row " + std::to_string(row + 1) + ": bad number '" + s + "'");
  return *v;
}

inline std::size_t field_size(const std::string& path, std::size_t row, const std::string& s) {
  const double v = field_double(path, row, s);
  if (!(v >= 0.0) || v != std::floor(v)) {
    throw InputError(path + ": row " + std::to_string(row + 1) + ": bad count '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline RiskTable read_risk_table(const std::string& path, const Dataset& ds) {
  const auto rows = detail::read_table(
      path, "record,id,pattern,group_size,singleton,marginal_risk,pairwise_mean_risk", ds.n());
  RiskTable t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 7) throw InputError(path + ": row " + std::to_string(i + 1) + ": expected 7 fields");
    if (detail::field_size(path, i, r[0]) != i || r[1] != record_label(ds, i)) {
      throw InputError(path + ": row " + std::to_string(i + 1) + " does not match input record " +
                       record_label(ds, i));
    }
    t.pattern.push_back(detail::field_size(path, i, r[2]));
    t.group_size.push_back(detail::field_size(path, i, r[3]));
    if (r[4] == "1") t.singletons.push_back(i);
    t.marginal.push_back(detail::field_double(path, i, r[5]));
    t.pairwise_mean.push_back(detail::field_double(path, i, r[6]));
  }
  return t;
}

inline void stage_risk(const RunConfig& cfg) {
  const OutputPaths out{cfg.output_dir};
  std::filesystem::create_directories(out.dir);
  const Dataset ds = load_input(cfg);
  const PatternIndex idx = build_pattern_index(ds, cfg.pattern_vars);
  write_risk_table(out.risk(), ds, compute_risk_table(ds, idx, cfg));
}

// ------------------------------------------------------------- weight stage

inline WeightVector weights_from_risk_table(const RunConfig& cfg, const RiskTable& t) {
  WeightOptions opts{cfg.weight_floor};
  WeightVector wv;
  switch (cfg.scheme) {
    case WeightScheme::kUnit:
      wv = unit_weights(t.n());
      break;
    case WeightScheme::kMarginal: {
      RiskVector rv;
      rv.values = t.marginal;
      rv.context = RiskContext::kConfidential;
      rv.singletons = t.singletons;
      wv = marginal_weights(rv, opts);
      break;
    }
    case WeightScheme::kPairwise:
      wv = pairwise_weights_from_means(t.pairwise_mean, t.singletons, opts);
      break;
  }
  if (cfg.adjusts_weights()) wv = adjust_weights(wv, cfg.c, cfg.g);
  return wv;
}

inline nlohmann::ordered_json weights_meta_json(const WeightVector& wv, double floor) {
  nlohmann::ordered_json j;
  j["provenance"] = wv.provenance.tag();
  j["scheme"] = to_string(wv.provenance.base);
  j["adjusted"] = wv.provenance.adjusted;
  j["c"] = wv.provenance.c;
  j["g"] = wv.provenance.g;
  j["floor"] = floor;
  j["lower_clamped"] = wv.lower_clamped;
  j["upper_clamped"] = wv.upper_clamped;
  j["floored"] = wv.floored;
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (double v : wv.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  j["mean"] = wv.values.empty() ? 0.0 : sum / static_cast<double>(wv.size());
  j["min"] = lo;
  j["max"] = hi;
  return j;
}

inline void write_weights(const OutputPaths& out, const Dataset& ds, const WeightVector& wv,
                          double floor) {
  std::ostringstream os;
  os << "record,id,weight,provenance\n";
  const std::string tag = csv::quote_if_needed(wv.provenance.tag(), ',');
  for (std::size_t i = 0; i < wv.size(); ++i) {
    os << i << ',' << csv::quote_if_needed(record_label(ds, i), ',') << ','
       << csv::format_double(wv.values[i]) << ',' << tag << '\n';
  }
  write_text(out.weights(), os.str());
  write_json(out.weights_meta(), weights_meta_json(wv, floor));
}

/// Reads weights.csv and its JSON sidecar and checks they were produced
/// under the scheme and adjustment the configuration asks for.
inline WeightVector read_weights(const OutputPaths& out, const Dataset& ds, const RunConfig& cfg) {
  const auto rows = detail::read_table(out.weights(), "record,id,weight,provenance", ds.n());
  const auto meta = read_json(out.weights_meta());
  WeightVector wv;
  wv.provenance.base = parse_weight_scheme(meta.at("scheme").get<std::string>());
  wv.provenance.adjusted = meta.at("adjusted").get<bool>();
  wv.provenance.c = meta.at("c").get<double>();
  wv.provenance.g = meta.at("g").get<double>();
  wv.lower_clamped = meta.at("lower_clamped").get<std::size_t>();
  wv.upper_clamped = meta.at("upper_clamped").get<std::size_t>();
  wv.floored = meta.at("floored").get<std::vector<std::size_t>>();
  if (wv.provenance.base != cfg.scheme || wv.provenance.adjusted != cfg.adjusts_weights() ||
      (cfg.adjusts_weights() && (wv.provenance.c != cfg.c || wv.provenance.g != cfg.g))) {
    throw InputError(out.weights() + " was built as '" + wv.provenance.tag() +
                     "', which does not match the configured weights; rerun the weights stage");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 4 || detail::field_size(out.weights(), i, r[0]) != i) {
      throw InputError(out.weights() + ": row " + std::to_string(i + 1) + " is malformed");
    }
    const double w = detail::field_double(out.weights(), i, r[2]);
    if (!(w >= 0.0 && w <= 1.0)) {
      throw InputError(out.weights() + ": row " + std::to_string(i + 1) + ": weight outside [0, 1]");
    }
    wv.values.push_back(w);
  }
  return wv;
}

/// Reads risks from `risk_path`, else from risk.csv in the output directory
/// when present, otherwise recomputes them.
inline void stage_weights(const RunConfig& cfg, const std::optional<std::string>& risk_path = {}) {
  const OutputPaths out{cfg.output_dir};
  std::filesystem::create_directories(out.dir);
  const Dataset ds = load_input(cfg);
  RiskTable t;
  if (risk_path) {
    t = read_risk_table(*risk_path, ds);
  } else if (std::filesystem::exists(out.risk())) {
    t = read_risk_table(out.risk(), ds);
  } else if (cfg.scheme == WeightScheme::kUnit) {
    t.marginal.assign(ds.n(), 0.0);
  } else {
    const PatternIndex idx = build_pattern_index(ds, cfg.pattern_vars);
    t = compute_risk_table(ds, idx, cfg);
  }
  write_weights(out, ds, weights_from_risk_table(cfg, t), cfg.weight_floor);
}

// ---------------------------------------------------------- synthesis stage

namespace detail {

inline std::string trace_header(const nlohmann::ordered_json& header) {
  return "# " + header.dump() + "\n";
}

inline void write_mixture_trace(const std::string& path, const MixtureDraws& d,
                                const nlohmann::ordered_json& header) {
  std::ostringstream os;
  os << trace_header(header);
  os << "chain,iteration,gamma,log_pseudo_likelihood,occupied";
  for (int k = 0; k < d.K; ++k) os << ",pi_" << k + 1;
  for (int k = 0; k < d.K; ++k) os << ",sigma_" << k + 1;
  for (int k = 0; k < d.K; ++k) {
    for (int r = 0; r < d.R; ++r) os << ",beta_" << k + 1 << '_' << r;
  }
  os << '\n';
  for (const auto& s : d.draws) {
    os << s.chain << ',' << s.iteration << ',' << csv::format_double(s.gamma) << ','
       << csv::format_double(s.log_pseudo_likelihood) << ',' << s.occupied();
    for (int k = 0; k < d.K; ++k) os << ',' << csv::format_double(s.pi(k));
    for (int k = 0; k < d.K; ++k) os << ',' << csv::format_double(s.sigma(k));
    for (int k = 0; k < d.K; ++k) {
      for (int r = 0; r < d.R; ++r) os << ',' << csv::format_double(s.beta(k, r));
    }
    os << '\n';
  }
  write_text(path, os.str());
}

inline void write_nb_trace(const std::string& path, const NBDraws& d,
                           const nlohmann::ordered_json& header) {
  std::ostringstream os;
  os << trace_header(header);
  os << "chain,iteration,mu,phi\n";
  for (std::size_t t = 0; t < d.size(); ++t) {
    os << d.chain[t] << ',' << d.iteration[t] << ',' << csv::format_double(d.mu[t]) << ','
       << csv::format_double(d.phi[t]) << '\n';
  }
  write_text(path, os.str());
}

}  // namespace detail

/// Fits the configured synthesizer under `wv`, writes the L synthetic
/// datasets, the trace and the manifest, and returns the synthetic set.
inline SyntheticSet synthesize(const RunConfig& cfg, const Dataset& ds, const WeightVector& wv,
                               const OutputPaths& out) {
  std::filesystem::create_directories(out.dir);
  const std::uint64_t fit_seed = cfg.seeds.effective("fit");
  const std::uint64_t syn_seed = cfg.seeds.effective("synthesis");
  nlohmann::ordered_json manifest;
  manifest["format"] = "rwsynth-manifest/1";
  manifest["family"] = to_string(cfg.family);
  manifest["input"] = cfg.input;
  manifest["n"] = ds.n();
  manifest["L"] = cfg.L;
  SyntheticSet set;
  nlohmann::ordered_json header;
  header["family"] = to_string(cfg.family);
  header["seed"] = fit_seed;
  if (cfg.family == SynthFamily::kMixture) {
    MixtureConfig mc = cfg.mixture;
    mc.seed = fit_seed;
    const DesignMatrix dm = build_design_matrix(ds, cfg.predictors);
    const auto y = ds.y();
    SensitiveTransform tr;
    if (cfg.model_on_log) tr = SensitiveTransform::log_for(y);
    std::vector<double> ym(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ym[i] = tr.forward(y[i]);
    const MixtureDraws draws = fit_mixture_pseudo(ym, dm.X, wv.values, mc);
    set = generate_mixture_synthetic(draws, ds, dm.X, tr, cfg.L, syn_seed);
    header["config"] = mc.to_json();
    header["design"] = dm.names;
    header["transform"] = {{"log", tr.log}, {"shift", tr.shift}};
    detail::write_mixture_trace(out.trace(), draws, header);
    manifest["retained_draws"] = draws.draws.size();
    manifest["transform"] = header["transform"];
    manifest["design"] = dm.names;
    manifest["synthesizer"] = mc.to_json();
    manifest["diagnostics"] = draws.diagnostics.to_json();
  } else {
    NBConfig nc = cfg.negative_binomial;
    nc.seed = fit_seed;
    const auto y = ds.y();
    const NBDraws draws = fit_nb_pseudo(y, wv.values, nc);
    set = generate_nb_synthetic(draws, ds, cfg.L, syn_seed);
    header["config"] = nc.to_json();
    detail::write_nb_trace(out.trace(), draws, header);
    manifest["retained_draws"] = draws.size();
    manifest["transform"] = {{"log", false}, {"shift", 0.0}};
    manifest["design"] = nlohmann::ordered_json::array();
    manifest["synthesizer"] = nc.to_json();
    manifest["diagnostics"] = draws.diagnostics.to_json();
  }
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < set.L(); ++l) {
    const std::string name = OutputPaths::synthetic_name(l);
    save_dataset((out.dir / name).string(), set.datasets[l], CsvOptions{cfg.delimiter});
    files.push_back(name);
  }
  manifest["files"] = files;
  manifest["draw_indices"] = set.draw_indices;
  manifest["seeds"] = {{"fit", fit_seed}, {"synthesis", syn_seed}};
  manifest["provenance"] = {{"weights", wv.provenance.tag()},
                            {"scheme", to_string(wv.provenance.base)},
                            {"adjusted", wv.provenance.adjusted},
                            {"c", wv.provenance.c},
                            {"g", wv.provenance.g},
                            {"r", cfg.ball.r}};
  manifest["weights"] = weights_meta_json(wv, cfg.weight_floor);
  manifest["trace"] = "trace.csv";
  write_json(out.manifest(), manifest);
  return set;
}

/// Reads weights.csv from the output directory; a unit-weight run without
/// that file uses weights of 1.
inline void stage_synthesize(const RunConfig& cfg) {
  const OutputPaths out{cfg.output_dir};
  const Dataset ds = load_input(cfg);
  WeightVector wv;
  if (std::filesystem::exists(out.weights())) {
    wv = read_weights(out, ds, cfg);
  } else if (cfg.scheme == WeightScheme::kUnit && !cfg.adjusts_weights()) {
    wv = unit_weights(ds.n());
  } else {
    throw IoError("missing " + out.weights() + ": run the weights stage first");
  }
  synthesize(cfg, ds, wv, out);
}

// --------------------------------------------------------- evaluation stage

/// Synthetic datasets listed in a manifest, resolved next to it.
struct LoadedRelease {
  SyntheticSet set;
  nlohmann::json manifest;
};

inline LoadedRelease load_release(const std::string& manifest_path, const Schema& schema,
                                  char delimiter) {
  LoadedRelease r;
  r.manifest = read_json(manifest_path);
  const auto base = std::filesystem::path(manifest_path).parent_path();
  if (!r.manifest.contains("files") || !r.manifest["files"].is_array() ||
      r.manifest["files"].empty()) {
    throw InputError(manifest_path + ": manifest lists no synthetic files");
  }
  for (const auto& f : r.manifest["files"]) {
    r.set.datasets.push_back(
        load_dataset((base / f.get<std::string>()).string(), schema, CsvOptions{delimiter}));
  }
  r.set.family = r.manifest.value("family", "");
  r.set.draw_indices = r.manifest.value("draw_indices", std::vector<std::size_t>{});
  r.set.seed = r.manifest.contains("seeds") ? r.manifest["seeds"].value("synthesis", 0ULL) : 0ULL;
  return r;
}

inline RiskVector release_risk(const Dataset& conf, const SyntheticSet& set,
                               const PatternIndex& idx, const BallConfig& ball) {
  std::vector<RiskVector> per;
  for (std::size_t l = 0; l < set.L(); ++l) {
    per.push_back(marginal_risk_synthetic(conf, set.datasets[l], idx, ball, static_cast<int>(l)));
  }
  return average_risks(per);
}

struct EvaluationResult {
  nlohmann::ordered_json report;
  RiskVector synthetic_risk;
  bool ceiling_violated = false;
};

/// Scores the release named by `manifest_path` against the confidential
/// input and writes report.json plus CSV sidecars. Returns kRiskCeiling
/// when the configured ceiling is exceeded (the report is written first).
inline EvaluationResult evaluate(const RunConfig& cfg, const std::string& manifest_path) {
  const OutputPaths out{cfg.output_dir};
  std::filesystem::create_directories(out.dir);
  const Dataset ds = load_input(cfg);
  const PatternIndex idx = build_pattern_index(ds, cfg.pattern_vars);
  const auto release = load_release(manifest_path, cfg.schema, cfg.delimiter);
  const std::uint64_t boot_seed = cfg.seeds.effective("bootstrap");
  std::vector<std::string> warnings;

  const RiskVector conf_risk = marginal_risk_confidential(ds, idx, cfg.ball, cfg.singleton_policy);
  const PairRiskMap pm = pairwise_risk_confidential(ds, idx, cfg.ball, cfg.singleton_policy);
  const RiskVector syn_risk = release_risk(ds, release.set, idx, cfg.ball);

  nlohmann::ordered_json rep;
  rep["tool"] = "rwsynth";
  rep["version"] = kVersion;
  rep["generated_at"] = utc_timestamp();
  rep["config"] = cfg.to_json();
  rep["seeds"] = {{"master", cfg.seeds.master},
                  {"fit", cfg.seeds.effective("fit")},
                  {"synthesis", cfg.seeds.effective("synthesis")},
                  {"bootstrap", boot_seed},
                  {"simulation", cfg.seeds.effective("simulation")}};
  rep["data"] = {{"n", ds.n()},
                 {"pattern_vars", cfg.pattern_vars},
                 {"pattern_count", idx.group_count()},
                 {"singletons", conf_risk.singletons}};
  if (!conf_risk.singletons.empty()) {
    warnings.push_back(std::to_string(conf_risk.singletons.size()) +
                       " singleton record(s) scored under singleton_policy=floor");
  }

  const auto& m = release.manifest;
  rep["synthesis"] = {{"manifest", std::filesystem::path(manifest_path).filename().string()},
                      {"family", m.value("family", "")},
                      {"L", release.set.L()},
                      {"draw_indices", release.set.draw_indices},
                      {"retained_draws", m.value("retained_draws", 0)},
                      {"provenance", m.contains("provenance") ? m["provenance"] : nlohmann::json()}};
  rep["weights"] = m.contains("weights") ? nlohmann::ordered_json(m["weights"])
                                         : nlohmann::ordered_json();
  if (m.contains("weights") && m["weights"].value("lower_clamped", 0) > 0) {
    warnings.push_back("weight adjustment clamped " +
                       std::to_string(m["weights"].value("lower_clamped", 0)) +
                       " weight(s) at 0");
  }
  rep["diagnostics"] = m.contains("diagnostics") ? nlohmann::ordered_json(m["diagnostics"])
                                                 : nlohmann::ordered_json();
  if (m.contains("diagnostics")) {
    for (const auto& w : m["diagnostics"].value("warnings", std::vector<std::string>{})) {
      warnings.push_back(w);
    }
  }

  nlohmann::ordered_json risk;
  risk["r"] = cfg.ball.r;
  risk["confidential"] = to_json(risk_summary(conf_risk));
  RiskVector pw_mean;
  pw_mean.values = pairwise_mean_risks(pm);
  for (auto& v : pw_mean.values) {
    if (std::isnan(v)) v = 0.0;
  }
  risk["confidential_pairwise_mean"] = to_json(risk_summary(pw_mean));
  risk["synthetic"] = to_json(risk_summary(syn_risk));
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < release.set.L(); ++l) {
    const auto rv = marginal_risk_synthetic(ds, release.set.datasets[l], idx, cfg.ball,
                                            static_cast<int>(l));
    per.push_back(risk_summary(rv).mean);
  }
  risk["synthetic_mean_by_dataset"] = per;

  std::vector<std::pair<std::string, const std::vector<double>*>> risk_cols{
      {"confidential", &conf_risk.values},
      {"confidential_pairwise_mean", &pw_mean.values},
      {"synthetic", &syn_risk.values}};

  std::optional<RiskVector> base_risk;
  if (cfg.evaluation.baseline_manifest) {
    const auto baseline = load_release(*cfg.evaluation.baseline_manifest, cfg.schema, cfg.delimiter);
    base_risk = release_risk(ds, baseline.set, idx, cfg.ball);
    risk["baseline"] = to_json(risk_summary(*base_risk));
    risk_cols.emplace_back("baseline", &base_risk->values);
    auto wam = whack_a_mole(*base_risk, syn_risk, cfg.evaluation.whack_a_mole_threshold).to_json();
    wam["baseline_manifest"] = *cfg.evaluation.baseline_manifest;
    wam["baseline_weights"] = baseline.manifest.contains("provenance")
                                  ? baseline.manifest["provenance"].value("weights", "")
                                  : "";
    rep["whack_a_mole"] = wam;
  } else {
    risk["baseline"] = nullptr;
    rep["whack_a_mole"] = nullptr;
  }

  std::optional<RiskVector> top_risk;
  if (cfg.evaluation.topcode_quantile) {
    const double q = *cfg.evaluation.topcode_quantile;
    const double at = topcode_threshold(ds, q);
    const Dataset tc = topcode_at(ds, at);
    top_risk = marginal_risk_synthetic(ds, tc, idx, cfg.ball);
    auto s = to_json(risk_summary(*top_risk));
    s["quantile"] = q;
    s["threshold"] = at;
    std::size_t censored = 0;
    for (const auto& r : ds.records()) censored += r.y > at ? 1 : 0;
    s["censored"] = censored;
    risk["topcoded"] = s;
    risk_cols.emplace_back("topcoded", &top_risk->values);
  } else {
    risk["topcoded"] = nullptr;
  }
  rep["risk"] = risk;

  // Utility.
  nlohmann::ordered_json util;
  nlohmann::ordered_json stats_json = nlohmann::ordered_json::array();
  std::ostringstream ucsv;
  ucsv << "statistic,source,method,point,lower,upper\n";
  auto csv_row = [&](const std::string& source, const EstimateCI& e) {
    ucsv << csv::quote_if_needed(e.statistic, ',') << ',' << source << ',' << e.method << ','
         << csv::format_double(e.point) << ',' << csv::format_double(e.lower) << ','
         << csv::format_double(e.upper) << '\n';
  };
  for (std::size_t s = 0; s < cfg.evaluation.statistics.size(); ++s) {
    const Statistic stat = Statistic::parse(cfg.evaluation.statistics[s]);
    const auto conf_ci = bootstrap_estimate(ds, stat, cfg.evaluation.bootstrap_B,
                                            derive_seed(boot_seed, "confidential", s));
    const auto syn = synthetic_estimate(release.set, stat, cfg.evaluation.bootstrap_B,
                                        derive_seed(boot_seed, "synthetic", s));
    nlohmann::ordered_json e;
    e["statistic"] = stat.label();
    e["confidential"] = conf_ci.to_json();
    e["synthetic"] = syn.combined.to_json();
    e["single_dataset"] = syn.per_dataset.front().to_json();
    stats_json.push_back(e);
    csv_row("confidential", conf_ci);
    csv_row("synthetic", syn.combined);
    csv_row("single_dataset", syn.per_dataset.front());
  }
  util["statistics"] = stats_json;
  if (cfg.evaluation.regression) {
    const auto& spec = *cfg.evaluation.regression;
    const auto conf = ols_coefficient(ds, spec.predictors, spec.column, spec.level);
    const double z = 1.959963984540054;
    EstimateCI conf_ci{conf.term, "ols", conf.estimate, conf.estimate - z * std::sqrt(conf.variance),
                       conf.estimate + z * std::sqrt(conf.variance), conf.variance};
    std::vector<double> q, u;
    for (const auto& d : release.set.datasets) {
      const auto o = ols_coefficient(d, spec.predictors, spec.column, spec.level);
      q.push_back(o.estimate);
      u.push_back(o.variance);
    }
    const auto syn_ci = combine_partial(q, u, 0.95, conf.term);
    util["regression"] = {{"term", conf.term},
                          {"confidential", conf_ci.to_json()},
                          {"synthetic", syn_ci.to_json()}};
    csv_row("confidential", conf_ci);
    csv_row("synthetic", syn_ci);
  } else {
    util["regression"] = nullptr;
  }
  const auto ecdf = ecdf_utility(ds, release.set);
  util["ecdf"] = {{"U_m", ecdf.U_m}, {"U_a", ecdf.U_a}, {"pooled", true}};
  util["bootstrap"] = {{"B", cfg.evaluation.bootstrap_B},
                       {"synthetic_method", "per-dataset bootstrap, combined across datasets"}};
  rep["utility"] = util;

  EvaluationResult result;
  if (cfg.risk_ceiling) {
    const double mx = risk_summary(syn_risk).max;
    result.ceiling_violated = mx > *cfg.risk_ceiling;
    rep["risk_ceiling"] = {{"limit", *cfg.risk_ceiling},
                           {"max_risk", mx},
                           {"violated", result.ceiling_violated}};
    if (result.ceiling_violated) {
      warnings.push_back("maximum synthetic risk " + csv::format_double(mx) +
                         " exceeds the risk ceiling " + csv::format_double(*cfg.risk_ceiling));
    }
  } else {
    rep["risk_ceiling"] = nullptr;
  }
  rep["warnings"] = warnings;
  rep["files"] = {{"risk_by_record", "risk_by_record.csv"},
                  {"weights_by_scheme", "weights_by_scheme.csv"},
                  {"utility", "utility.csv"}};

  // Sidecars.
  write_text(out.risk_by_record(), per_record_csv(ds, risk_cols));
  const WeightOptions wopts{cfg.weight_floor};
  const auto w_unit = unit_weights(ds.n());
  const auto w_marg = marginal_weights(conf_risk, wopts);
  const auto w_pair = pairwise_weights(pm, wopts);
  std::vector<std::pair<std::string, const std::vector<double>*>> wcols{
      {"unit", &w_unit.values}, {"marginal", &w_marg.values}, {"pairwise", &w_pair.values}};
  std::optional<WeightVector> used;
  if (std::filesystem::exists(out.weights())) {
    used = read_weights(out, ds, cfg);
    wcols.emplace_back("used", &used->values);
  }
  write_text(out.weights_by_scheme(), per_record_csv(ds, wcols));
  write_text(out.utility(), ucsv.str());
  write_json(out.report(), rep);

  result.report = std::move(rep);
  result.synthetic_risk = syn_risk;
  return result;
}

inline ExitCode stage_evaluate(const RunConfig& cfg, const std::optional<std::string>& manifest = {}) {
  const OutputPaths out{cfg.output_dir};
  const auto res = evaluate(cfg, manifest.value_or(out.manifest()));
  return res.ceiling_violated ? ExitCode::kRiskCeiling : ExitCode::kOk;
}

/// risk -> weights -> synthesize -> evaluate in one call.
inline ExitCode run_pipeline(const RunConfig& cfg) {
  stage_risk(cfg);
  stage_weights(cfg);
  stage_synthesize(cfg);
  return stage_evaluate(cfg);
}

}  // namespace rwsynth
