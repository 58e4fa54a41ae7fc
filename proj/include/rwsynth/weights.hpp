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

// Likelihood exponents in [0, 1] derived from confidential-data risks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "rwsynth/error.hpp"
#include "rwsynth/risk.hpp"

namespace rwsynth {

enum class WeightScheme { kUnit, kMarginal, kPairwise };

inline std::string_view to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::kUnit: return "unit";
    case WeightScheme::kMarginal: return "marginal";
    case WeightScheme::kPairwise: return "pairwise";
  }
  return "?";
}

inline WeightScheme parse_weight_scheme(std::string_view s) {
  if (s == "unit") return WeightScheme::kUnit;
  if (s == "marginal") return WeightScheme::kMarginal;
  if (s == "pairwise") return WeightScheme::kPairwise;
  throw InputError("unknown weight scheme '" + std::string(s) + "'");
}

struct WeightProvenance {
  WeightScheme base = WeightScheme::kUnit;
  bool adjusted = false;
  double c = 1.0;
  double g = 0.0;

  std::string tag() const {
    std::string t(to_string(base));
    if (adjusted) t = "adjusted(c=" + csv::format_double(c) + ";g=" + csv::format_double(g) + ";" + t + ")";
    return t;
  }
};

struct WeightVector {
  std::vector<double> values;
  WeightProvenance provenance;
  std::size_t lower_clamped = 0;               // c * w + g fell below 0
  std::size_t upper_clamped = 0;               // c * w + g rose above 1
  std::vector<std::size_t> floored;            // records lifted to the floor

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

struct WeightOptions {
  /// Weights below the floor are lifted to it; singleton records (scored
  /// under SingletonPolicy::kFloor) are set to it.
  double floor = 0.0;

  void validate() const {
    if (!(floor >= 0.0 && floor < 1.0)) throw InputError("weights.floor must be in [0, 1)");
  }
};

namespace detail {

inline void apply_floor(WeightVector& wv, const std::vector<std::size_t>& singletons,
                        double floor) {
  for (auto i : singletons) {
    wv.values[i] = floor;
    wv.floored.push_back(i);
  }
  if (floor > 0.0) {
    for (std::size_t i = 0; i < wv.values.size(); ++i) {
      if (wv.values[i] < floor) {
        wv.values[i] = floor;
        wv.floored.push_back(i);
      }
    }
  }
  std::sort(wv.floored.begin(), wv.floored.end());
  wv.floored.erase(std::unique(wv.floored.begin(), wv.floored.end()), wv.floored.end());
}

}  // namespace detail

inline WeightVector unit_weights(std::size_t n) {
  WeightVector wv;
  wv.values.assign(n, 1.0);
  wv.provenance.base = WeightScheme::kUnit;
  return wv;
}

/// alpha_i = 1 - IR_i^c.
inline WeightVector marginal_weights(const RiskVector& rv, const WeightOptions& opts = {}) {
  opts.validate();
  if (rv.context != RiskContext::kConfidential) {
    throw InputError("marginal weights need confidential-data risks");
  }
  WeightVector wv;
  wv.provenance.base = WeightScheme::kMarginal;
  wv.values.resize(rv.size());
  for (std::size_t i = 0; i < rv.size(); ++i) wv.values[i] = 1.0 - rv.values[i];
  detail::apply_floor(wv, rv.singletons, opts.floor);
  return wv;
}

/// Per-record mean pairwise risk sum_{j != i in M_p,i} IR_{i,j} / (|M_p,i| - 1).
/// Singleton records get NaN.
inline std::vector<double> pairwise_mean_risks(const PairRiskMap& pm) {
  const auto& idx = pm.index();
  std::vector<double> out(idx.n(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < idx.n(); ++i) {
    const std::size_t m = idx.group_size_of(i);
    if (m >= 2) out[i] = pm.row_sum(i) / static_cast<double>(m - 1);
  }
  return out;
}

/// alpha_i = 1 - mean pairwise risk of record i. `singletons` lists the
/// records scored under SingletonPolicy::kFloor; they get the floor.
inline WeightVector pairwise_weights_from_means(const std::vector<double>& mean_risk,
                                                const std::vector<std::size_t>& singletons,
                                                const WeightOptions& opts = {}) {
  opts.validate();
  WeightVector wv;
  wv.provenance.base = WeightScheme::kPairwise;
  wv.values.resize(mean_risk.size());
  for (std::size_t i = 0; i < mean_risk.size(); ++i) {
    if (std::isnan(mean_risk[i])) {
      if (std::find(singletons.begin(), singletons.end(), i) == singletons.end()) {
        throw InputError("record " + std::to_string(i) + " is a singleton pattern");
      }
      wv.values[i] = opts.floor;
      continue;
    }
    wv.values[i] = 1.0 - mean_risk[i];
  }
  detail::apply_floor(wv, singletons, opts.floor);
  return wv;
}

/// alpha_i = 1 - sum_{j != i in M_p,i} IR_{i,j} / (|M_p,i| - 1).
inline WeightVector pairwise_weights(const PairRiskMap& pm, const WeightOptions& opts = {}) {
  return pairwise_weights_from_means(pairwise_mean_risks(pm), pm.singletons(), opts);
}

/// Same weights assembled as the mean of pair weights alpha_{i,j} =
/// 1 - IR_{i,j} over j != i in the pattern. Kept as an independent route to
/// the closed form above.
inline WeightVector pairwise_weights_by_averaging(const PairRiskMap& pm,
                                                  const WeightOptions& opts = {}) {
  opts.validate();
  const auto& idx = pm.index();
  WeightVector wv;
  wv.provenance.base = WeightScheme::kPairwise;
  wv.values.assign(idx.n(), 0.0);
  for (const auto& g : idx.groups()) {
    const std::size_t m = g.members.size();
    for (auto i : g.members) {
      if (m < 2) {
        wv.values[i] = opts.floor;
        continue;
      }
      double acc = 0.0;
      for (auto j : g.members) {
        if (j != i) acc += 1.0 - pm.at(i, j);
      }
      wv.values[i] = acc / static_cast<double>(m - 1);
    }
  }
  detail::apply_floor(wv, pm.singletons(), opts.floor);
  return wv;
}

/// alpha* = clamp(c * alpha + g, 0, 1). Clamp counts are recorded so reports
/// can flag when the lower bound fires.
inline WeightVector adjust_weights(const WeightVector& wv, double c, double g) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("weights.c must be >= 0");
  if (!std::isfinite(g)) throw InputError("weights.g must be finite");
  WeightVector out;
  out.provenance = wv.provenance;
  out.provenance.adjusted = true;
  out.provenance.c = c;
  out.provenance.g = g;
  out.floored = wv.floored;
  out.values.resize(wv.size());
  for (std::size_t i = 0; i < wv.size(); ++i) {
    double v = c * wv.values[i] + g;
    if (v < 0.0) {
      v = 0.0;
      ++out.lower_clamped;
    } else if (v > 1.0) {
      v = 1.0;
      ++out.upper_clamped;
    }
    out.values[i] = v;
  }
  return out;
}

}  // namespace rwsynth
