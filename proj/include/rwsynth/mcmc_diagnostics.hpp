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

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rwsynth/stats.hpp"

namespace rwsynth {

/// Split-chain potential scale reduction. Each chain's retained trace is cut
/// in half and the halves are treated as separate chains.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) continue;
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  if (halves.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    means.push_back(stats::mean(h));
    w += stats::variance(h);
  }
  w /= static_cast<double>(halves.size());
  const double b = n * stats::variance(means);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

struct ChainDiagnostics {
  std::vector<std::map<std::string, double>> acceptance;  // per chain
  std::map<std::string, double> rhat;                     // per monitored scalar
  std::map<std::string, double> step_sizes;               // chain 0, post-adaptation
  std::vector<std::string> warnings;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["acceptance"] = nlohmann::ordered_json::array();
    for (const auto& a : acceptance) {
      nlohmann::ordered_json c;
      for (const auto& [k, v] : a) c[k] = v;
      j["acceptance"].push_back(c);
    }
    j["split_rhat"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rhat) {
      j["split_rhat"][k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json();
    }
    j["warnings"] = warnings;
    return j;
  }
};

/// Fills `diag.rhat` for each named trace and adds a warning for values
/// above `threshold`.
inline void monitor_rhat(ChainDiagnostics& diag, const std::string& name,
                         const std::vector<std::vector<double>>& per_chain, double threshold) {
  const double r = split_rhat(per_chain);
  diag.rhat[name] = r;
  if (std::isfinite(r) && r > threshold) {
    diag.warnings.push_back("split R-hat for " + name + " is " + std::to_string(r) +
                            " (> " + std::to_string(threshold) + ")");
  }
}

/// Step-size adaptation for random-walk Metropolis during burn-in: every
/// `window` proposals the log step moves toward the target acceptance rate.
class AdaptiveStep {
 public:
  AdaptiveStep(double initial, double target) : log_step_(std::log(initial)), target_(target) {}

  double step() const { return std::exp(log_step_); }

  void record(bool accepted, bool adapting) {
    ++proposals_;
    accepted_ += accepted ? 1 : 0;
    if (!adapting) {
      ++post_proposals_;
      post_accepted_ += accepted ? 1 : 0;
      return;
    }
    ++window_count_;
    window_accepted_ += accepted ? 1 : 0;
    if (window_count_ == kWindow) {
      const double rate = static_cast<double>(window_accepted_) / kWindow;
      ++windows_;
      log_step_ += (rate - target_) * 2.0 / std::sqrt(static_cast<double>(windows_));
      window_count_ = 0;
      window_accepted_ = 0;
    }
  }

  /// Acceptance rate after adaptation stopped (all proposals if none).
  double acceptance_rate() const {
    if (post_proposals_ > 0) {
      return static_cast<double>(post_accepted_) / static_cast<double>(post_proposals_);
    }
    return proposals_ ? static_cast<double>(accepted_) / static_cast<double>(proposals_) : 0.0;
  }

 private:
  static constexpr int kWindow = 50;
  double log_step_;
  double target_;
  long proposals_ = 0;
  long accepted_ = 0;
  long post_proposals_ = 0;
  long post_accepted_ = 0;
  int window_count_ = 0;
  int window_accepted_ = 0;
  long windows_ = 0;
};

}  // namespace rwsynth
