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

// Identification-risk probabilities. An intruder knows a record's pattern
// and its true sensitive value y_i, and picks uniformly among pattern-mates
// whose released value falls inside the ball around y_i. A record's risk is
// the share of its pattern group lying *outside* that ball, zeroed when the
// record's own released value is not close to its truth.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rwsynth/data_model.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/parallel.hpp"
#include "rwsynth/stats.hpp"

namespace rwsynth {

enum class RiskContext { kConfidential, kSynthetic, kAveraged };

/// What to do with pattern groups of size one. The formulas assign such a
/// record zero risk although it is unique in its pattern.
enum class SingletonPolicy {
  kError,  // refuse to score
  kFloor,  // score, and give the record the weight floor downstream
};

struct RiskVector {
  std::vector<double> values;
  RiskContext context = RiskContext::kConfidential;
  int dataset = -1;                       // synthetic(l): l, otherwise -1
  std::vector<std::size_t> singletons;    // records scored under kFloor

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Integer numerators behind a marginal risk vector, kept for exact checks:
/// risk[i] = outside[i] / group_size[i] * own_close[i].
struct RiskCounts {
  std::vector<std::size_t> outside;
  std::vector<std::size_t> group_size;
  std::vector<std::uint8_t> own_close;

  RiskVector to_risk(RiskContext ctx, int dataset = -1) const {
    RiskVector rv;
    rv.context = ctx;
    rv.dataset = dataset;
    rv.values.resize(outside.size());
    for (std::size_t i = 0; i < outside.size(); ++i) {
      rv.values[i] = own_close[i]
                         ? static_cast<double>(outside[i]) / static_cast<double>(group_size[i])
                         : 0.0;
    }
    return rv;
  }
};

namespace detail {

inline void check_singletons(const PatternIndex& idx, SingletonPolicy policy) {
  if (policy != SingletonPolicy::kError) return;
  std::string bad;
  std::size_t count = 0;
  for (std::size_t g = 0; g < idx.group_count(); ++g) {
    const auto& grp = idx.groups()[g];
    if (grp.members.size() != 1) continue;
    if (count < 10) {
      if (!bad.empty()) bad += ", ";
      bad += "record " + std::to_string(grp.members.front()) + " (pattern";
      for (int k : grp.key) bad += " " + std::to_string(k);
      bad += ")";
    }
    ++count;
  }
  if (count > 0) {
    throw InputError(std::to_string(count) +
                     " singleton pattern group(s) under singleton_policy=error: " + bad);
  }
}

/// Number of `sorted` values inside the ball around `center`. The predicate
/// is exactly `in_ball`; fl(v - center) is monotone in v so the inside set
/// is one contiguous run of the sorted values.
inline std::size_t count_inside(std::span<const double> sorted, double center,
                                const BallConfig& cfg) {
  const double rad = cfg.radius(center);
  auto lo = std::partition_point(sorted.begin(), sorted.end(),
                                 [&](double v) { return v - center < -rad; });
  auto hi = std::partition_point(lo, sorted.end(),
                                 [&](double v) { return v - center <= rad; });
  return static_cast<std::size_t>(hi - lo);
}

inline void check_index(const Dataset& ds, const PatternIndex& idx) {
  if (idx.n() != ds.n()) throw InputError("pattern index was built on a different dataset");
}

}  // namespace detail

/// Counts behind marginal_risk_synthetic: balls are centred at the
/// confidential truths and membership is tested on the released values.
inline RiskCounts marginal_risk_counts(std::span<const double> truth,
                                       std::span<const double> released,
                                       const PatternIndex& idx, const BallConfig& cfg) {
  cfg.validate();
  if (truth.size() != released.size() || truth.size() != idx.n()) {
    throw InputError("risk inputs differ in length");
  }
  const std::size_t n = truth.size();
  RiskCounts rc;
  rc.outside.assign(n, 0);
  rc.group_size.assign(n, 0);
  rc.own_close.assign(n, 0);
  parallel_for(idx.group_count(), [&](std::size_t g) {
    const auto& members = idx.groups()[g].members;
    std::vector<double> sorted;
    sorted.reserve(members.size());
    for (auto h : members) sorted.push_back(released[h]);
    std::sort(sorted.begin(), sorted.end());
    for (auto i : members) {
      rc.group_size[i] = members.size();
      rc.outside[i] = members.size() - detail::count_inside(sorted, truth[i], cfg);
      rc.own_close[i] = in_ball(released[i], truth[i], cfg) ? 1 : 0;
    }
  });
  return rc;
}

/// Confidential-data risk: #{h in M_p,i : y_h outside B(y_i, r)} / |M_p,i|.
inline RiskVector marginal_risk_confidential(const Dataset& ds, const PatternIndex& idx,
                                             const BallConfig& cfg,
                                             SingletonPolicy policy = SingletonPolicy::kError) {
  detail::check_index(ds, idx);
  detail::check_singletons(idx, policy);
  const auto y = ds.y();
  auto rv = marginal_risk_counts(y, y, idx, cfg).to_risk(RiskContext::kConfidential);
  rv.singletons = idx.singleton_records();
  return rv;
}

/// Pattern columns of the released table must equal the confidential ones;
/// only the sensitive column may differ.
inline void check_partial_synthesis(const Dataset& conf, const Dataset& syn,
                                    const PatternIndex& idx) {
  if (conf.n() != syn.n()) {
    throw InputError("synthetic dataset has " + std::to_string(syn.n()) + " records, expected " +
                     std::to_string(conf.n()));
  }
  for (const auto& var : idx.pattern_vars()) {
    auto cc = conf.schema().index_of(var);
    auto sc = syn.schema().find(var);
    if (!sc) throw InputError("synthetic dataset lacks pattern column '" + var + "'");
    for (std::size_t i = 0; i < conf.n(); ++i) {
      if (conf.code(i, cc) != syn.code(i, *sc)) {
        throw InputError("pattern column '" + var + "' differs at record " + std::to_string(i));
      }
    }
  }
}

/// Risk of one released dataset l: the coverage share times T_i.
inline RiskVector marginal_risk_synthetic(const Dataset& conf, const Dataset& syn,
                                          const PatternIndex& idx, const BallConfig& cfg,
                                          int dataset = 0) {
  detail::check_index(conf, idx);
  check_partial_synthesis(conf, syn, idx);
  const auto y = conf.y();
  const auto ys = syn.y();
  return marginal_risk_counts(y, ys, idx, cfg).to_risk(RiskContext::kSynthetic, dataset);
}

/// Elementwise mean over the L per-dataset vectors.
inline RiskVector average_risks(std::span<const RiskVector> per_dataset) {
  if (per_dataset.empty()) throw InputError("average_risks: no risk vectors");
  const std::size_t n = per_dataset.front().size();
  RiskVector out;
  out.context = RiskContext::kAveraged;
  out.values.assign(n, 0.0);
  for (const auto& rv : per_dataset) {
    if (rv.size() != n) throw InputError("average_risks: length mismatch");
    for (std::size_t i = 0; i < n; ++i) out.values[i] += rv.values[i];
  }
  const double L = static_cast<double>(per_dataset.size());
  for (auto& v : out.values) v /= L;
  return out;
}

/// Within-pattern joint risks. For each group the counts
/// #{h : y_h outside B(y_i) and outside B(y_j)} are stored for i < j in
/// member order; cross-pattern pairs are implicitly zero.
class PairRiskMap {
 public:
  PairRiskMap() = default;

  /// Risk of a pair of record ids; 0 for pairs in different patterns and for
  /// i == j.
  double at(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    const std::size_t g = index_->group_of(i);
    if (index_->group_of(j) != g) return 0.0;
    const auto& members = index_->groups()[g].members;
    const std::size_t m = members.size();
    std::size_t a = position_[i];
    std::size_t b = position_[j];
    if (a > b) std::swap(a, b);
    return static_cast<double>(counts_[g][tri(a, b, m)]) / static_cast<double>(m);
  }

  std::uint32_t count(std::size_t i, std::size_t j) const {
    const std::size_t g = index_->group_of(i);
    if (i == j || index_->group_of(j) != g) return 0;
    std::size_t a = position_[i];
    std::size_t b = position_[j];
    if (a > b) std::swap(a, b);
    return counts_[g][tri(a, b, index_->groups()[g].members.size())];
  }

  /// Sum over j != i in i's pattern of IR_{i,j}.
  double row_sum(std::size_t i) const { return row_sums_.at(i); }

  const PatternIndex& index() const { return *index_; }

  /// Visits every stored (i, j, risk) with i < j as record ids, grouped by
  /// pattern and in member order.
  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t g = 0; g < index_->group_count(); ++g) {
      const auto& members = index_->groups()[g].members;
      const std::size_t m = members.size();
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
          f(members[a], members[b],
            static_cast<double>(counts_[g][tri(a, b, m)]) / static_cast<double>(m));
        }
      }
    }
  }

  std::size_t entry_count() const {
    std::size_t total = 0;
    for (const auto& c : counts_) total += c.size();
    return total;
  }

  const std::vector<std::size_t>& singletons() const { return singletons_; }

 private:
  friend PairRiskMap pairwise_risk_confidential(const Dataset&, const PatternIndex&,
                                                const BallConfig&, SingletonPolicy);

  static std::size_t tri(std::size_t a, std::size_t b, std::size_t m) {
    // row-major strict upper triangle, a < b
    return a * (2 * m - a - 1) / 2 + (b - a - 1);
  }

  const PatternIndex* index_ = nullptr;
  std::vector<std::vector<std::uint32_t>> counts_;
  std::vector<std::size_t> position_;
  std::vector<double> row_sums_;
  std::vector<std::size_t> singletons_;
};

/// Per pattern: a bitset "h outside B(y_i)" for every member i, then one
/// popcount of the AND per pair. Memory is O(|M_p|^2) bits per pattern.
/// The returned map refers to `idx`, which must outlive it.
inline PairRiskMap pairwise_risk_confidential(const Dataset& ds, const PatternIndex& idx,
                                              const BallConfig& cfg,
                                              SingletonPolicy policy = SingletonPolicy::kError) {
  cfg.validate();
  detail::check_index(ds, idx);
  detail::check_singletons(idx, policy);
  const auto y = ds.y();
  PairRiskMap pm;
  pm.index_ = &idx;
  pm.counts_.resize(idx.group_count());
  pm.position_.assign(ds.n(), 0);
  pm.row_sums_.assign(ds.n(), 0.0);
  pm.singletons_ = idx.singleton_records();
  for (const auto& g : idx.groups()) {
    for (std::size_t a = 0; a < g.members.size(); ++a) pm.position_[g.members[a]] = a;
  }
  parallel_for(idx.group_count(), [&](std::size_t g) {
    const auto& members = idx.groups()[g].members;
    const std::size_t m = members.size();
    const std::size_t words = (m + 63) / 64;
    std::vector<std::uint64_t> outside(m * words, 0);
    for (std::size_t a = 0; a < m; ++a) {
      const double center = y[members[a]];
      for (std::size_t h = 0; h < m; ++h) {
        if (!in_ball(y[members[h]], center, cfg)) {
          outside[a * words + h / 64] |= std::uint64_t{1} << (h % 64);
        }
      }
    }
    auto& counts = pm.counts_[g];
    counts.assign(m * (m - 1) / 2, 0);
    std::vector<std::uint64_t> sums(m, 0);
    for (std::size_t a = 0; a < m; ++a) {
      const std::uint64_t* oa = &outside[a * words];
      for (std::size_t b = a + 1; b < m; ++b) {
        const std::uint64_t* ob = &outside[b * words];
        std::uint32_t c = 0;
        for (std::size_t w = 0; w < words; ++w) c += std::popcount(oa[w] & ob[w]);
        counts[PairRiskMap::tri(a, b, m)] = c;
        sums[a] += c;
        sums[b] += c;
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      pm.row_sums_[members[a]] = static_cast<double>(sums[a]) / static_cast<double>(m);
    }
  });
  return pm;
}

struct RiskSummary {
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double max = 0.0;
  std::vector<double> quantiles;  // 1%, 2%, ..., 99%
};

inline RiskSummary risk_summary(const RiskVector& rv) {
  if (rv.values.empty()) throw InputError("risk_summary: empty risk vector");
  std::vector<double> s = rv.values;
  std::sort(s.begin(), s.end());
  RiskSummary out;
  out.mean = stats::mean(s);
  out.median = stats::quantile_sorted(s, 0.5);
  out.q1 = stats::quantile_sorted(s, 0.25);
  out.q3 = stats::quantile_sorted(s, 0.75);
  out.iqr = out.q3 - out.q1;
  out.max = s.back();
  out.quantiles.reserve(99);
  for (int p = 1; p <= 99; ++p) {
    out.quantiles.push_back(stats::quantile_sorted(s, p / 100.0));
  }
  return out;
}

}  // namespace rwsynth
