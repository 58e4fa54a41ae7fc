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

// Analysis-specific utility (bootstrap intervals, OLS coefficients, the
// partial-synthesis combining rule) and global utility from empirical CDFs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "rwsynth/data_model.hpp"
#include "rwsynth/design.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/parallel.hpp"
#include "rwsynth/rng.hpp"
#include "rwsynth/stats.hpp"
#include "rwsynth/synth.hpp"

namespace rwsynth {

/// Summary statistic of the sensitive column: mean, median or quantile(q).
struct Statistic {
  enum class Kind { kMean, kMedian, kQuantile };
  Kind kind = Kind::kMean;
  double q = 0.5;

  static Statistic mean() { return {Kind::kMean, 0.5}; }
  static Statistic median() { return {Kind::kMedian, 0.5}; }
  static Statistic quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must be in (0, 1)");
    return {Kind::kQuantile, q};
  }

  /// Accepts "mean", "median" or "quantile:<q>".
  static Statistic parse(std::string_view s) {
    if (s == "mean") return mean();
    if (s == "median") return median();
    constexpr std::string_view prefix = "quantile:";
    if (s.substr(0, prefix.size()) == prefix) {
      const auto q = csv::parse_double(s.substr(prefix.size()));
      if (q) return quantile(*q);
    }
    throw InputError("unknown statistic '" + std::string(s) +
                     "' (expected mean, median or quantile:<q>)");
  }

  std::string label() const {
    switch (kind) {
      case Kind::kMean: return "mean";
      case Kind::kMedian: return "median";
      case Kind::kQuantile: return "quantile:" + csv::format_double(q);
    }
    return "?";
  }

  double operator()(std::span<const double> x) const {
    switch (kind) {
      case Kind::kMean: return stats::mean(x);
      case Kind::kMedian: return stats::median(x);
      case Kind::kQuantile: return stats::quantile(x, q);
    }
    return 0.0;
  }
};

struct EstimateCI {
  std::string statistic;
  std::string method;     // "bootstrap" or "combined_partial"
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double variance = 0.0;  // bootstrap: replicate variance; combined: T

  double length() const { return upper - lower; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["statistic"] = statistic;
    j["method"] = method;
    j["point"] = point;
    j["lower"] = lower;
    j["upper"] = upper;
    j["variance"] = variance;
    return j;
  }
};

inline constexpr std::size_t kMinBootstrapReplicates = 200;

/// Percentile bootstrap: 2.5% and 97.5% type-7 quantiles of the statistic
/// over B resamples of size n. When n^n <= B every ordered resample is
/// enumerated once instead, which gives the exact bootstrap distribution.
inline EstimateCI bootstrap_estimate(std::span<const double> y, const Statistic& stat,
                                     std::size_t B, std::uint64_t seed) {
  if (y.empty()) throw InputError("bootstrap: empty sample");
  if (B < kMinBootstrapReplicates) {
    throw InputError("bootstrap needs B >= " + std::to_string(kMinBootstrapReplicates));
  }
  const std::size_t n = y.size();
  std::size_t total = 1;
  bool exhaustive = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > B / n) {
      exhaustive = false;
      break;
    }
    total *= n;
  }
  std::vector<double> reps;
  if (exhaustive) {
    reps.resize(total);
    std::vector<double> sample(n);
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i) {
        sample[i] = y[c % n];
        c /= n;
      }
      reps[code] = stat(sample);
    }
  } else {
    reps.resize(B);
    parallel_for(B, [&](std::size_t b) {
      Rng rng = make_rng(seed, "bootstrap", b);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<double> sample(n);
      for (auto& v : sample) v = y[pick(rng)];
      reps[b] = stat(sample);
    });
  }
  EstimateCI out;
  out.statistic = stat.label();
  out.method = "bootstrap";
  out.point = stat(y);
  out.variance = stats::variance(reps);
  std::sort(reps.begin(), reps.end());
  out.lower = std::min(out.point, stats::quantile_sorted(reps, 0.025));
  out.upper = std::max(out.point, stats::quantile_sorted(reps, 0.975));
  return out;
}

inline EstimateCI bootstrap_estimate(const Dataset& ds, const Statistic& stat, std::size_t B,
                                     std::uint64_t seed) {
  const auto y = ds.y();
  return bootstrap_estimate(std::span<const double>(y), stat, B, seed);
}

/// Combining rule for partially synthetic data: q = mean(q_l),
/// T = u + b / L, df = (L - 1)(1 + u L / b)^2. With b = 0 the interval uses
/// the normal quantile and T = u.
inline EstimateCI combine_partial(std::span<const double> estimates,
                                  std::span<const double> within_vars, double level = 0.95,
                                  std::string statistic = "") {
  if (estimates.empty()) throw InputError("combine_partial: need L >= 1");
  if (estimates.size() != within_vars.size()) {
    throw InputError("combine_partial: estimates and variances differ in length");
  }
  for (double u : within_vars) {
    if (!(u >= 0.0)) throw InputError("combine_partial: within variances must be >= 0");
  }
  const double L = static_cast<double>(estimates.size());
  const double qbar = stats::mean(estimates);
  const double ubar = stats::mean(within_vars);
  const double b = stats::variance(estimates);
  EstimateCI out;
  out.statistic = std::move(statistic);
  out.method = "combined_partial";
  out.point = qbar;
  const double alpha = 1.0 - level;
  double crit;
  if (b > 0.0) {
    out.variance = ubar + b / L;
    const double r = 1.0 + ubar * L / b;
    const double df = (L - 1.0) * r * r;
    crit = boost::math::quantile(boost::math::complement(boost::math::students_t(df), alpha / 2));
  } else {
    out.variance = ubar;
    crit = boost::math::quantile(boost::math::complement(boost::math::normal(), alpha / 2));
  }
  const double half = crit * std::sqrt(out.variance);
  out.lower = qbar - half;
  out.upper = qbar + half;
  return out;
}

struct SyntheticEstimate {
  std::vector<EstimateCI> per_dataset;
  EstimateCI combined;
};

/// Bootstraps each synthetic dataset (replicate variance as the within
/// variance) and combines across datasets.
inline SyntheticEstimate synthetic_estimate(const SyntheticSet& syn, const Statistic& stat,
                                            std::size_t B, std::uint64_t seed) {
  if (syn.datasets.empty()) throw InputError("synthetic_estimate: empty synthetic set");
  SyntheticEstimate out;
  std::vector<double> q, u;
  for (std::size_t l = 0; l < syn.L(); ++l) {
    out.per_dataset.push_back(
        bootstrap_estimate(syn.datasets[l], stat, B, derive_seed(seed, "bootstrap-dataset", l)));
    q.push_back(out.per_dataset.back().point);
    u.push_back(out.per_dataset.back().variance);
  }
  out.combined = combine_partial(q, u, 0.95, stat.label());
  return out;
}

struct OlsEstimate {
  std::string term;
  double estimate = 0.0;
  double variance = 0.0;
};

/// OLS of the sensitive column on dummy-coded predictors (first level is the
/// reference). Returns the coefficient named "<column>=<level>" and its
/// classical sampling variance s^2 [(X'X)^-1]_jj.
inline OlsEstimate ols_coefficient(const Dataset& ds, const std::vector<std::string>& predictors,
                                   const std::string& column, const std::string& level) {
  const DesignMatrix dm = build_design_matrix(ds, predictors);
  const std::string term = column + "=" + level;
  const auto it = std::find(dm.names.begin(), dm.names.end(), term);
  if (it == dm.names.end()) {
    throw InputError("regression term '" + term + "' is not in the design (a reference level or "
                     "a column missing from the predictors)");
  }
  const auto j = static_cast<Eigen::Index>(it - dm.names.begin());
  const Eigen::Index n = dm.X.rows();
  const Eigen::Index p = dm.X.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dm.X);
  if (qr.rank() < p) {
    throw NumericError("regression design is rank deficient (rank " + std::to_string(qr.rank()) +
                       " < " + std::to_string(p) + " columns)");
  }
  if (n <= p) throw NumericError("regression needs more rows than coefficients");
  const auto yv = ds.y();
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), n);
  const Eigen::VectorXd beta = qr.solve(y);
  const double rss = (y - dm.X * beta).squaredNorm();
  const double s2 = rss / static_cast<double>(n - p);
  const Eigen::MatrixXd xtx_inv =
      (dm.X.transpose() * dm.X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return {term, beta(j), s2 * xtx_inv(j, j)};
}

struct EcdfUtility {
  double U_m = 0.0;
  double U_a = 0.0;
};

/// Compares the confidential ECDF with the ECDF of all synthetic values
/// pooled together, at every distinct value of the merged sample.
inline EcdfUtility ecdf_utility(std::span<const double> conf, std::span<const double> pooled) {
  if (conf.empty() || pooled.empty()) throw InputError("ecdf_utility: empty sample");
  std::vector<double> a(conf.begin(), conf.end());
  std::vector<double> s(pooled.begin(), pooled.end());
  std::sort(a.begin(), a.end());
  std::sort(s.begin(), s.end());
  std::vector<double> support;
  support.reserve(a.size() + s.size());
  std::merge(a.begin(), a.end(), s.begin(), s.end(), std::back_inserter(support));
  support.erase(std::unique(support.begin(), support.end()), support.end());
  EcdfUtility out;
  double acc = 0.0;
  for (double v : support) {
    const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), v) - a.begin()) /
                      static_cast<double>(a.size());
    const double fs = static_cast<double>(std::upper_bound(s.begin(), s.end(), v) - s.begin()) /
                      static_cast<double>(s.size());
    const double d = std::abs(fa - fs);
    out.U_m = std::max(out.U_m, d);
    acc += d * d;
  }
  out.U_a = acc / static_cast<double>(support.size());
  return out;
}

inline EcdfUtility ecdf_utility(const Dataset& conf, const SyntheticSet& syn) {
  if (syn.datasets.empty()) throw InputError("ecdf_utility: empty synthetic set");
  std::vector<double> pooled;
  pooled.reserve(conf.n() * syn.L());
  for (const auto& d : syn.datasets) {
    for (const auto& r : d.records()) pooled.push_back(r.y);
  }
  const auto y = conf.y();
  return ecdf_utility(std::span<const double>(y), std::span<const double>(pooled));
}

}  // namespace rwsynth
