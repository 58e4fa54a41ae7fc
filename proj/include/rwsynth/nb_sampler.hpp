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

// Weighted pseudo posterior for a single negative binomial count model with
// mean mu and dispersion phi (variance mu + mu^2 / phi). Random-walk
// Metropolis on (log mu, log phi), one coordinate at a time, with normal
// priors on both logs.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/mcmc_diagnostics.hpp"
#include "rwsynth/parallel.hpp"
#include "rwsynth/rng.hpp"
#include "rwsynth/stats.hpp"

namespace rwsynth {

struct NBConfig {
  double log_mu_prior_mean = 0.0;
  double log_mu_prior_sd = 5.0;
  double log_phi_prior_mean = 0.0;
  double log_phi_prior_sd = 5.0;
  double mu_step = 0.05;   // initial proposal sd on log mu
  double phi_step = 0.1;   // initial proposal sd on log phi
  bool adapt = true;       // tune steps toward 44% acceptance during burn-in
  int iterations = 4000;
  int burn_in = 2000;
  int thin = 2;
  int chains = 2;
  std::uint64_t seed = 1;
  double rhat_warning = 1.1;

  void validate() const {
    if (!(mu_step > 0.0) || !(phi_step > 0.0)) throw InputError("negative_binomial step sizes must be > 0");
    if (!(log_mu_prior_sd > 0.0) || !(log_phi_prior_sd > 0.0)) {
      throw InputError("negative_binomial prior scales must be > 0");
    }
    if (burn_in < 0 || iterations <= burn_in) {
      throw InputError("negative_binomial: need iterations > burn_in >= 0");
    }
    if (thin < 1) throw InputError("negative_binomial.thin must be >= 1");
    if (chains < 1) throw InputError("negative_binomial.chains must be >= 1");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["log_mu_prior_mean"] = log_mu_prior_mean;
    j["log_mu_prior_sd"] = log_mu_prior_sd;
    j["log_phi_prior_mean"] = log_phi_prior_mean;
    j["log_phi_prior_sd"] = log_phi_prior_sd;
    j["mu_step"] = mu_step;
    j["phi_step"] = phi_step;
    j["adapt"] = adapt;
    j["iterations"] = iterations;
    j["burn_in"] = burn_in;
    j["thin"] = thin;
    j["chains"] = chains;
    j["seed"] = seed;
    j["rhat_warning"] = rhat_warning;
    return j;
  }
};

struct NBDraws {
  std::vector<double> mu;
  std::vector<double> phi;
  std::vector<int> chain;
  std::vector<int> iteration;
  ChainDiagnostics diagnostics;

  std::size_t size() const { return mu.size(); }
};

/// Weighted counts collapsed onto distinct values: sum_u W_u logNB(u).
class NBPseudoLikelihood {
 public:
  NBPseudoLikelihood(std::span<const double> y, std::span<const double> w) {
    if (y.size() != w.size()) throw InputError("log_pseudo_likelihood: length mismatch");
    std::map<double, double> by_value;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(y[i] >= 0.0) || y[i] != std::floor(y[i])) {
        throw InputError("negative binomial data must be nonnegative integers");
      }
      if (w[i] != 0.0) by_value[y[i]] += w[i];
    }
    for (const auto& [v, wt] : by_value) {
      values_.push_back(v);
      weights_.push_back(wt);
      total_weight_ += wt;
    }
  }

  double operator()(double mu, double phi) const {
    double acc = 0.0;
    for (std::size_t u = 0; u < values_.size(); ++u) {
      acc += weights_[u] * stats::neg_binomial_logpmf(values_[u], mu, phi);
    }
    return acc;
  }

  double total_weight() const { return total_weight_; }

  /// Weighted mean and variance of the data, for initialization.
  std::pair<double, double> moments() const {
    if (total_weight_ <= 0.0) return {1.0, 1.0};
    double m = 0.0;
    for (std::size_t u = 0; u < values_.size(); ++u) m += weights_[u] * values_[u];
    m /= total_weight_;
    double v = 0.0;
    for (std::size_t u = 0; u < values_.size(); ++u) {
      v += weights_[u] * (values_[u] - m) * (values_[u] - m);
    }
    return {m, v / total_weight_};
  }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
  double total_weight_ = 0.0;
};

/// Sum_i w_i log NB(y_i | mu, phi).
inline double nb_log_pseudo_likelihood(double mu, double phi, std::span<const double> y,
                                       std::span<const double> w) {
  const double v = NBPseudoLikelihood(y, w)(mu, phi);
  if (!std::isfinite(v)) throw NumericError("non-finite negative binomial log likelihood");
  return v;
}

namespace detail {

struct NBChainResult {
  std::vector<double> mu, phi;
  std::vector<int> iteration;
  double accept_mu = 0.0;
  double accept_phi = 0.0;
  double mu_step = 0.0;
  double phi_step = 0.0;
};

inline NBChainResult run_nb_chain(const NBPseudoLikelihood& lik, const NBConfig& cfg, int chain) {
  Rng rng = make_rng(cfg.seed, "nb-chain", static_cast<std::uint64_t>(chain));
  auto log_prior = [&](double lm, double lp) {
    const double a = (lm - cfg.log_mu_prior_mean) / cfg.log_mu_prior_sd;
    const double b = (lp - cfg.log_phi_prior_mean) / cfg.log_phi_prior_sd;
    return -0.5 * (a * a + b * b);
  };
  auto target = [&](double lm, double lp) {
    if (lik.total_weight() == 0.0) return log_prior(lm, lp);
    return lik(std::exp(lm), std::exp(lp)) + log_prior(lm, lp);
  };

  double lm = cfg.log_mu_prior_mean;
  double lp = cfg.log_phi_prior_mean;
  if (lik.total_weight() > 0.0) {
    const auto [m, v] = lik.moments();
    lm = std::log(std::max(m, 0.5));
    const double excess = v - m;
    lp = std::log(excess > 1e-8 ? std::clamp(m * m / excess, 1e-3, 1e6) : 1e6);
  }
  double cur = target(lm, lp);
  AdaptiveStep mu_step(cfg.mu_step, 0.44);
  AdaptiveStep phi_step(cfg.phi_step, 0.44);
  NBChainResult out;
  for (int t = 0; t < cfg.iterations; ++t) {
    const bool adapting = cfg.adapt && t < cfg.burn_in;
    {
      const double prop = lm + mu_step.step() * std_normal(rng);
      const double next = target(prop, lp);
      const bool accept = std::log(uniform01(rng)) < next - cur;
      if (accept) {
        lm = prop;
        cur = next;
      }
      mu_step.record(accept, adapting);
    }
    {
      const double prop = lp + phi_step.step() * std_normal(rng);
      const double next = target(lm, prop);
      const bool accept = std::log(uniform01(rng)) < next - cur;
      if (accept) {
        lp = prop;
        cur = next;
      }
      phi_step.record(accept, adapting);
    }
    if (!std::isfinite(cur) || !std::isfinite(lm) || !std::isfinite(lp)) {
      throw NumericError("negative binomial chain " + std::to_string(chain) +
                         " reached a non-finite state at iteration " + std::to_string(t));
    }
    if (t >= cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) {
      out.mu.push_back(std::exp(lm));
      out.phi.push_back(std::exp(lp));
      out.iteration.push_back(t);
    }
  }
  out.accept_mu = mu_step.acceptance_rate();
  out.accept_phi = phi_step.acceptance_rate();
  out.mu_step = mu_step.step();
  out.phi_step = phi_step.step();
  return out;
}

}  // namespace detail

/// Fits the weighted NB model. y must hold nonnegative integers and the
/// weights must not all be zero unless `allow_zero_weight` (prior-only run).
inline NBDraws fit_nb_pseudo(std::span<const double> y, std::span<const double> w,
                             const NBConfig& cfg, bool allow_zero_weight = false) {
  cfg.validate();
  if (y.empty()) throw InputError("fit_nb_pseudo: empty data");
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("weights must lie in [0, 1]");
  }
  NBPseudoLikelihood lik(y, w);
  if (!(lik.total_weight() > 0.0) && !allow_zero_weight) {
    throw InputError("all weights are zero: the pseudo posterior is the prior only");
  }
  std::vector<detail::NBChainResult> results(static_cast<std::size_t>(cfg.chains));
  parallel_for(results.size(), [&](std::size_t c) {
    results[c] = detail::run_nb_chain(lik, cfg, static_cast<int>(c));
  });
  NBDraws out;
  std::vector<std::vector<double>> mu_tr, phi_tr;
  for (std::size_t c = 0; c < results.size(); ++c) {
    auto& r = results[c];
    out.mu.insert(out.mu.end(), r.mu.begin(), r.mu.end());
    out.phi.insert(out.phi.end(), r.phi.begin(), r.phi.end());
    out.iteration.insert(out.iteration.end(), r.iteration.begin(), r.iteration.end());
    out.chain.insert(out.chain.end(), r.mu.size(), static_cast<int>(c));
    out.diagnostics.acceptance.push_back({{"log_mu", r.accept_mu}, {"log_phi", r.accept_phi}});
    std::vector<double> lmu, lphi;
    for (double v : r.mu) lmu.push_back(std::log(v));
    for (double v : r.phi) lphi.push_back(std::log(v));
    mu_tr.push_back(std::move(lmu));
    phi_tr.push_back(std::move(lphi));
  }
  out.diagnostics.step_sizes["log_mu"] = results.front().mu_step;
  out.diagnostics.step_sizes["log_phi"] = results.front().phi_step;
  monitor_rhat(out.diagnostics, "log_mu", mu_tr, cfg.rhat_warning);
  monitor_rhat(out.diagnostics, "log_phi", phi_tr, cfg.rhat_warning);
  return out;
}

}  // namespace rwsynth
