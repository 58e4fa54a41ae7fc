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

// Comparative diagnostics: whack-a-mole detection, the topcoding baseline,
// and JSON / CSV serialization of risk and weight vectors.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rwsynth/data_model.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/risk.hpp"
#include "rwsynth/stats.hpp"
#include "rwsynth/weights.hpp"

namespace rwsynth {

struct WhackAMoleReport {
  struct Flag {
    std::size_t record = 0;
    double base = 0.0;
    double weighted = 0.0;
    double delta = 0.0;
  };

  double threshold = 0.25;
  std::vector<Flag> flagged;                                 // ascending record id
  std::vector<std::pair<double, std::size_t>> counts_by_threshold;
  double decreased_share = 0.0;                              // share with weighted < base

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["threshold"] = threshold;
    j["flagged_count"] = flagged.size();
    j["flagged"] = nlohmann::ordered_json::array();
    for (const auto& f : flagged) {
      j["flagged"].push_back(
          {{"record", f.record}, {"base", f.base}, {"weighted", f.weighted}, {"delta", f.delta}});
    }
    j["counts_by_threshold"] = nlohmann::ordered_json::array();
    for (const auto& [t, c] : counts_by_threshold) {
      j["counts_by_threshold"].push_back({{"threshold", t}, {"count", c}});
    }
    j["decreased_share"] = decreased_share;
    return j;
  }
};

inline const std::vector<double>& whack_a_mole_grid() {
  static const std::vector<double> grid{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5};
  return grid;
}

/// Flags records whose risk rose by at least `threshold` when moving from
/// the `base` release to the `weighted` release. Risks are count ratios, so
/// a delta equal to the threshold can land a few ulps below it; the
/// comparison allows a 1e-12 slack.
inline WhackAMoleReport whack_a_mole(const RiskVector& base, const RiskVector& weighted,
                                     double threshold = 0.25) {
  if (base.size() != weighted.size()) throw InputError("whack_a_mole: length mismatch");
  if (base.size() == 0) throw InputError("whack_a_mole: empty risk vectors");
  constexpr double kTieSlack = 1e-12;
  WhackAMoleReport rep;
  rep.threshold = threshold;
  std::size_t decreased = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double d = weighted[i] - base[i];
    if (d >= threshold - kTieSlack) rep.flagged.push_back({i, base[i], weighted[i], d});
    if (weighted[i] < base[i]) ++decreased;
  }
  for (double t : whack_a_mole_grid()) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < base.size(); ++i) c += (weighted[i] - base[i] >= t - kTieSlack) ? 1 : 0;
    rep.counts_by_threshold.emplace_back(t, c);
  }
  rep.decreased_share = static_cast<double>(decreased) / static_cast<double>(base.size());
  return rep;
}

/// Censors sensitive values above `value` to `value`. Idempotent.
inline Dataset topcode_at(const Dataset& ds, double value) {
  auto y = ds.y();
  for (auto& v : y) v = std::min(v, value);
  return ds.with_sensitive(y);
}

/// Type-7 empirical quantile of the sensitive column.
inline double topcode_threshold(const Dataset& ds, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw InputError("topcode quantile must be in (0, 1]");
  const auto y = ds.y();
  return stats::quantile(y, quantile);
}

/// Topcodes at the `quantile` point of the sensitive column (default 0.94,
/// i.e. roughly the top 6% of records are censored).
inline Dataset topcode(const Dataset& ds, double quantile = 0.94) {
  return topcode_at(ds, topcode_threshold(ds, quantile));
}

inline nlohmann::ordered_json to_json(const RiskSummary& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  j["median"] = s.median;
  j["q1"] = s.q1;
  j["q3"] = s.q3;
  j["iqr"] = s.iqr;
  j["max"] = s.max;
  j["quantiles"] = s.quantiles;
  return j;
}

/// UTC timestamp in ISO 8601, e.g. 2026-01-31T12:00:00Z.
inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Label of record i: the id column value when present, else i.
inline std::string record_label(const Dataset& ds, std::size_t i) {
  return ds.id_labels().empty() ? std::to_string(i) : ds.id_labels()[i];
}

/// CSV of named per-record columns: record,id,<name>...
inline std::string per_record_csv(const Dataset& ds,
                                  const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
  std::ostringstream os;
  os << "record,id";
  for (const auto& [name, v] : cols) {
    if (v->size() != ds.n()) throw InputError("column '" + name + "' has the wrong length");
    os << ',' << csv::quote_if_needed(name, ',');
  }
  os << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    os << i << ',' << csv::quote_if_needed(record_label(ds, i), ',');
    for (const auto& [name, v] : cols) os << ',' << csv::format_double((*v)[i]);
    os << '\n';
  }
  return os.str();
}

}  // namespace rwsynth
