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

// Risk-weighted pseudo posterior for a truncated Dirichlet-process mixture
// of normal linear regressions:
//
//   y_i | z_i = k ~ Normal(x_i' beta_k, sigma_k^2),  z_i ~ Multinomial(pi)
//   pi ~ Dirichlet(gamma / K, ..., gamma / K),       gamma ~ Gamma(a, b)
//   beta_k ~ Normal(0, s^2 I),                       sigma_k ~ half-t(3, 0, 1)
//
// Each record's likelihood term is raised to its weight alpha_i conditional
// on its label, i.e. (pi_{z_i} N(y_i | ...))^{alpha_i}. Sampling is blocked
// Gibbs with explicit labels; sigma and gamma use adaptive random-walk
// Metropolis on the log scale (adaptation stops after burn-in).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/mcmc_diagnostics.hpp"
#include "rwsynth/parallel.hpp"
#include "rwsynth/rng.hpp"
#include "rwsynth/stats.hpp"

namespace rwsynth {

struct MixtureConfig {
  int K = 10;
  double a_gamma = 1.0;
  double b_gamma = 1.0;
  double beta_prior_scale = 10.0;
  double sigma_prior_df = 3.0;
  double sigma_prior_scale = 1.0;
  /// Holds every sigma_k at this value instead of sampling it.
  std::optional<double> fixed_sigma;
  int iterations = 4000;
  int burn_in = 2000;
  int thin = 2;
  int chains = 2;
  std::uint64_t seed = 1;
  double rhat_warning = 1.1;

  void validate() const {
    if (K < 1 || K > 65535) throw InputError("mixture.K must be in [1, 65535]");
    if (!(a_gamma > 0.0) || !(b_gamma > 0.0)) throw InputError("mixture gamma prior must be positive");
    if (!(beta_prior_scale > 0.0)) throw InputError("mixture.beta_prior_scale must be > 0");
    if (!(sigma_prior_df > 0.0) || !(sigma_prior_scale > 0.0)) {
      throw InputError("mixture sigma prior must be positive");
    }
    if (fixed_sigma && !(*fixed_sigma > 0.0)) throw InputError("mixture.fixed_sigma must be > 0");
    if (burn_in < 0 || iterations <= burn_in) {
      throw InputError("mixture: need iterations > burn_in >= 0");
    }
    if (thin < 1) throw InputError("mixture.thin must be >= 1");
    if (chains < 1) throw InputError("mixture.chains must be >= 1");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["K"] = K;
    j["a_gamma"] = a_gamma;
    j["b_gamma"] = b_gamma;
    j["beta_prior_scale"] = beta_prior_scale;
    j["sigma_prior_df"] = sigma_prior_df;
    j["sigma_prior_scale"] = sigma_prior_scale;
    j["fixed_sigma"] = fixed_sigma ? nlohmann::ordered_json(*fixed_sigma) : nlohmann::ordered_json();
    j["iterations"] = iterations;
    j["burn_in"] = burn_in;
    j["thin"] = thin;
    j["chains"] = chains;
    j["seed"] = seed;
    j["rhat_warning"] = rhat_warning;
    return j;
  }
};

/// One retained state. Labels are 0-based component indices.
struct MixtureDraw {
  Eigen::VectorXd pi;
  Eigen::MatrixXd beta;  // K x R
  Eigen::VectorXd sigma;
  double gamma = 1.0;
  std::vector<std::uint16_t> z;
  int chain = 0;
  int iteration = 0;
  double log_pseudo_likelihood = 0.0;

  std::size_t occupied() const {
    std::vector<char> seen(static_cast<std::size_t>(pi.size()), 0);
    for (auto k : z) seen[k] = 1;
    return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
  }
};

struct MixtureDraws {
  std::vector<MixtureDraw> draws;  // chain 0 first, then chain 1, ...
  ChainDiagnostics diagnostics;
  int K = 0;
  int R = 0;
};

/// Draws a label with probabilities proportional to
/// (pi_k * N(y | x' beta_k, sigma_k))^exponent, normalized in log space.
inline std::size_t sample_z(double y, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                            const Eigen::VectorXd& pi, const Eigen::MatrixXd& beta,
                            const Eigen::VectorXd& sigma, Rng& rng, double exponent = 1.0) {
  const auto K = static_cast<std::size_t>(pi.size());
  std::vector<double> lp(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (!(pi(kk) > 0.0)) {
      lp[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double mean = x.dot(beta.row(kk));
    lp[k] = exponent * (std::log(pi(kk)) + stats::normal_logpdf(y, mean, sigma(kk)));
  }
  const double norm = stats::log_sum_exp(lp);
  if (!std::isfinite(norm)) throw NumericError("sample_z: no component has positive mass");
  double u = uniform01(rng);
  for (std::size_t k = 0; k < K; ++k) {
    u -= std::exp(lp[k] - norm);
    if (u < 0.0) return k;
  }
  for (std::size_t k = K; k-- > 0;) {
    if (std::isfinite(lp[k])) return k;
  }
  return K - 1;
}

/// Sum_i w_i log N(y_i | x_i' beta_{z_i}, sigma_{z_i}^2).
inline double mixture_log_pseudo_likelihood(const MixtureDraw& state, std::span<const double> y,
                                            const Eigen::MatrixXd& X, std::span<const double> w) {
  if (y.size() != w.size() || static_cast<Eigen::Index>(y.size()) != X.rows() ||
      state.z.size() != y.size()) {
    throw InputError("log_pseudo_likelihood: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] == 0.0) continue;
    const auto k = static_cast<Eigen::Index>(state.z[i]);
    const double mean = X.row(static_cast<Eigen::Index>(i)).dot(state.beta.row(k));
    acc += w[i] * stats::normal_logpdf(y[i], mean, state.sigma(k));
  }
  if (!std::isfinite(acc)) throw NumericError("non-finite log pseudo likelihood");
  return acc;
}

namespace detail {

struct MixtureChainResult {
  std::vector<MixtureDraw> draws;
  std::map<std::string, double> acceptance;
  double sigma_step = 0.0;
  double gamma_step = 0.0;
};

class MixtureChain {
 public:
  MixtureChain(std::span<const double> y, const Eigen::MatrixXd& X, std::span<const double> w,
               const MixtureConfig& cfg, int chain)
      : y_(y), X_(X), w_(w), cfg_(cfg), chain_(chain),
        K_(cfg.K), R_(static_cast<int>(X.cols())), n_(y.size()),
        rng_(make_rng(cfg.seed, "mixture-chain", static_cast<std::uint64_t>(chain))),
        sigma_steps_(static_cast<std::size_t>(cfg.K), AdaptiveStep(0.2, 0.4)),
        gamma_step_(0.5, 0.4) {}

  MixtureChainResult run() {
    initialize();
    MixtureChainResult out;
    for (int t = 0; t < cfg_.iterations; ++t) {
      const bool adapting = t < cfg_.burn_in;
      update_z();
      update_pi();
      update_beta();
      update_sigma(adapting);
      update_gamma(adapting);
      check_finite(t);
      if (t >= cfg_.burn_in && (t - cfg_.burn_in) % cfg_.thin == 0) {
        out.draws.push_back(snapshot(t));
      }
    }
    double acc = 0.0;
    for (const auto& s : sigma_steps_) acc += s.acceptance_rate();
    out.acceptance["sigma"] = cfg_.fixed_sigma ? 1.0 : acc / static_cast<double>(K_);
    out.acceptance["gamma"] = gamma_step_.acceptance_rate();
    out.sigma_step = sigma_steps_.front().step();
    out.gamma_step = gamma_step_.step();
    return out;
  }

 private:
  void initialize() {
    const auto K = static_cast<std::size_t>(K_);
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return y_[a] < y_[b]; });
    z_.assign(n_, 0);
    for (std::size_t r = 0; r < n_; ++r) {
      z_[order[r]] = static_cast<std::uint16_t>(std::min(K - 1, r * K / n_));
    }
    const double ysd = std::sqrt(stats::variance(y_)) + 1e-12;
    beta_ = Eigen::MatrixXd::Zero(K_, R_);
    sigma_ = Eigen::VectorXd::Constant(K_, cfg_.fixed_sigma.value_or(ysd));
    const double prior_prec = 1.0 / (cfg_.beta_prior_scale * cfg_.beta_prior_scale);
    for (int k = 0; k < K_; ++k) {
      Eigen::MatrixXd xtx = Eigen::MatrixXd::Identity(R_, R_) * prior_prec;
      Eigen::VectorXd xty = Eigen::VectorXd::Zero(R_);
      double wsum = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (z_[i] != k || w_[i] == 0.0) continue;
        const auto row = X_.row(static_cast<Eigen::Index>(i));
        xtx.noalias() += w_[i] * row.transpose() * row;
        xty.noalias() += w_[i] * y_[i] * row.transpose();
        wsum += w_[i];
      }
      beta_.row(k) = xtx.ldlt().solve(xty).transpose();
      if (!cfg_.fixed_sigma && wsum > 0.0) {
        double ss = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
          if (z_[i] != k) continue;
          const double r = y_[i] - X_.row(static_cast<Eigen::Index>(i)).dot(beta_.row(k));
          ss += w_[i] * r * r;
        }
        sigma_(k) = std::max(std::sqrt(ss / wsum), 1e-3 * ysd);
      }
    }
    log_pi_ = Eigen::VectorXd::Constant(K_, -std::log(static_cast<double>(K_)));
    gamma_ = 1.0;
  }

  void update_z() {
    const Eigen::MatrixXd means = X_ * beta_.transpose();  // n x K
    std::vector<double> log_norm(static_cast<std::size_t>(K_));
    for (int k = 0; k < K_; ++k) {
      log_norm[static_cast<std::size_t>(k)] = log_pi_(k) - stats::kLogSqrt2Pi - std::log(sigma_(k));
    }
    std::vector<double> lp(static_cast<std::size_t>(K_));
    for (std::size_t i = 0; i < n_; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K_; ++k) {
        const double zz = (y_[i] - means(ii, k)) / sigma_(k);
        const double v = w_[i] * (log_norm[static_cast<std::size_t>(k)] - 0.5 * zz * zz);
        lp[static_cast<std::size_t>(k)] = v;
        mx = std::max(mx, v);
      }
      double total = 0.0;
      for (auto& v : lp) {
        v = std::exp(v - mx);
        total += v;
      }
      double u = uniform01(rng_) * total;
      std::uint16_t pick = static_cast<std::uint16_t>(K_ - 1);
      for (int k = 0; k < K_; ++k) {
        u -= lp[static_cast<std::size_t>(k)];
        if (u < 0.0) {
          pick = static_cast<std::uint16_t>(k);
          break;
        }
      }
      z_[i] = pick;
    }
  }

  void update_pi() {
    weighted_counts_.assign(static_cast<std::size_t>(K_), 0.0);
    for (std::size_t i = 0; i < n_; ++i) weighted_counts_[z_[i]] += w_[i];
    const double a = gamma_ / K_;
    for (int k = 0; k < K_; ++k) {
      log_pi_(k) = log_gamma_draw(a + weighted_counts_[static_cast<std::size_t>(k)], rng_);
    }
    std::vector<double> tmp(log_pi_.data(), log_pi_.data() + K_);
    log_pi_.array() -= stats::log_sum_exp(tmp);
  }

  void update_beta() {
    const double prior_prec = 1.0 / (cfg_.beta_prior_scale * cfg_.beta_prior_scale);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(K_));
    for (std::size_t i = 0; i < n_; ++i) {
      if (w_[i] > 0.0) members[z_[i]].push_back(i);
    }
    resid_ss_.assign(static_cast<std::size_t>(K_), 0.0);
    for (int k = 0; k < K_; ++k) {
      const auto& mk = members[static_cast<std::size_t>(k)];
      const double s2 = sigma_(k) * sigma_(k);
      Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(R_, R_) * prior_prec;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(R_);
      if (!mk.empty()) {
        Eigen::MatrixXd Xw(static_cast<Eigen::Index>(mk.size()), R_);
        Eigen::VectorXd yw(static_cast<Eigen::Index>(mk.size()));
        for (std::size_t r = 0; r < mk.size(); ++r) {
          const double sw = std::sqrt(w_[mk[r]]);
          Xw.row(static_cast<Eigen::Index>(r)) = sw * X_.row(static_cast<Eigen::Index>(mk[r]));
          yw(static_cast<Eigen::Index>(r)) = sw * y_[mk[r]];
        }
        prec.noalias() += Xw.transpose() * Xw / s2;
        rhs.noalias() += Xw.transpose() * yw / s2;
      }
      Eigen::LLT<Eigen::MatrixXd> llt(prec);
      if (llt.info() != Eigen::Success) throw NumericError("beta precision is not positive definite");
      const Eigen::VectorXd mean = llt.solve(rhs);
      Eigen::VectorXd eps(R_);
      for (int r = 0; r < R_; ++r) eps(r) = std_normal(rng_);
      // prec = L L'  =>  L'^{-1} eps has covariance prec^{-1}
      const Eigen::VectorXd draw = mean + llt.matrixU().solve(eps);
      beta_.row(k) = draw.transpose();
      double ss = 0.0;
      for (auto i : mk) {
        const double r = y_[i] - X_.row(static_cast<Eigen::Index>(i)).dot(draw);
        ss += w_[i] * r * r;
      }
      resid_ss_[static_cast<std::size_t>(k)] = ss;
    }
  }

  double sigma_log_target(int k, double log_sigma) const {
    const double s = std::exp(log_sigma);
    const double wk = weighted_counts_[static_cast<std::size_t>(k)];
    const double ss = resid_ss_[static_cast<std::size_t>(k)];
    return -wk * log_sigma - ss / (2.0 * s * s) +
           stats::half_t_logkernel(s, cfg_.sigma_prior_df, cfg_.sigma_prior_scale) + log_sigma;
  }

  void update_sigma(bool adapting) {
    if (cfg_.fixed_sigma) return;
    for (int k = 0; k < K_; ++k) {
      auto& step = sigma_steps_[static_cast<std::size_t>(k)];
      const double cur = std::log(sigma_(k));
      const double prop = cur + step.step() * std_normal(rng_);
      const double log_ratio = sigma_log_target(k, prop) - sigma_log_target(k, cur);
      const bool accept = std::log(uniform01(rng_)) < log_ratio;
      if (accept) sigma_(k) = std::exp(prop);
      step.record(accept, adapting);
    }
  }

  double gamma_log_target(double log_gamma) const {
    const double g = std::exp(log_gamma);
    const double a = g / K_;
    const double log_dir = std::lgamma(g) - K_ * std::lgamma(a) + (a - 1.0) * log_pi_.sum();
    return log_dir + stats::gamma_logpdf(g, cfg_.a_gamma, cfg_.b_gamma) + log_gamma;
  }

  void update_gamma(bool adapting) {
    const double cur = std::log(gamma_);
    const double prop = cur + gamma_step_.step() * std_normal(rng_);
    const double log_ratio = gamma_log_target(prop) - gamma_log_target(cur);
    const bool accept = std::log(uniform01(rng_)) < log_ratio;
    if (accept) gamma_ = std::exp(prop);
    gamma_step_.record(accept, adapting);
  }

  void check_finite(int t) const {
    if (!beta_.allFinite() || !sigma_.allFinite() || !log_pi_.allFinite() ||
        !std::isfinite(gamma_) || (sigma_.array() <= 0.0).any() || !(gamma_ > 0.0)) {
      throw NumericError("mixture chain " + std::to_string(chain_) +
                         " reached a non-finite state at iteration " + std::to_string(t));
    }
  }

  MixtureDraw snapshot(int t) const {
    MixtureDraw d;
    d.pi = log_pi_.array().exp();
    d.pi /= d.pi.sum();
    d.beta = beta_;
    d.sigma = sigma_;
    d.gamma = gamma_;
    d.z = z_;
    d.chain = chain_;
    d.iteration = t;
    // residual sums are current for (z, beta); sigma moved after them
    double lpl = 0.0;
    for (int k = 0; k < K_; ++k) {
      const double wk = weighted_counts_[static_cast<std::size_t>(k)];
      lpl += -wk * (stats::kLogSqrt2Pi + std::log(sigma_(k))) -
             resid_ss_[static_cast<std::size_t>(k)] / (2.0 * sigma_(k) * sigma_(k));
    }
    d.log_pseudo_likelihood = lpl;
    return d;
  }

  std::span<const double> y_;
  const Eigen::MatrixXd& X_;
  std::span<const double> w_;
  const MixtureConfig& cfg_;
  int chain_;
  int K_;
  int R_;
  std::size_t n_;
  Rng rng_;
  std::vector<AdaptiveStep> sigma_steps_;
  AdaptiveStep gamma_step_;

  std::vector<std::uint16_t> z_;
  Eigen::MatrixXd beta_;
  Eigen::VectorXd sigma_;
  Eigen::VectorXd log_pi_;
  double gamma_ = 1.0;
  std::vector<double> weighted_counts_;
  std::vector<double> resid_ss_;
};

}  // namespace detail

/// Fits the weighted mixture. `X` must contain the intercept column.
inline MixtureDraws fit_mixture_pseudo(std::span<const double> y, const Eigen::MatrixXd& X,
                                       std::span<const double> w, const MixtureConfig& cfg) {
  cfg.validate();
  if (y.size() < 2) throw InputError("fit_mixture_pseudo: need n >= 2");
  if (static_cast<Eigen::Index>(y.size()) != X.rows() || w.size() != y.size()) {
    throw InputError("fit_mixture_pseudo: y, X and weights differ in length");
  }
  double wsum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("weights must lie in [0, 1]");
    wsum += v;
  }
  if (!(wsum > 0.0)) throw InputError("all weights are zero: the pseudo posterior is the prior only");
  for (double v : y) {
    if (!std::isfinite(v)) throw InputError("fit_mixture_pseudo: non-finite y");
  }

  std::vector<detail::MixtureChainResult> results(static_cast<std::size_t>(cfg.chains));
  parallel_for(results.size(), [&](std::size_t c) {
    detail::MixtureChain chain(y, X, w, cfg, static_cast<int>(c));
    results[c] = chain.run();
  });

  MixtureDraws out;
  out.K = cfg.K;
  out.R = static_cast<int>(X.cols());
  std::vector<std::vector<double>> gamma_tr, lpl_tr, occ_tr;
  std::vector<std::vector<std::vector<double>>> beta_tr(static_cast<std::size_t>(out.R));
  std::vector<std::vector<double>> sigma_tr;
  for (auto& r : results) {
    out.diagnostics.acceptance.push_back(r.acceptance);
    std::vector<double> g, l, o, s;
    std::vector<std::vector<double>> b(static_cast<std::size_t>(out.R));
    for (const auto& d : r.draws) {
      g.push_back(d.gamma);
      l.push_back(d.log_pseudo_likelihood);
      o.push_back(static_cast<double>(d.occupied()));
      if (cfg.K == 1) {
        s.push_back(d.sigma(0));
        for (int j = 0; j < out.R; ++j) b[static_cast<std::size_t>(j)].push_back(d.beta(0, j));
      }
    }
    gamma_tr.push_back(std::move(g));
    lpl_tr.push_back(std::move(l));
    occ_tr.push_back(std::move(o));
    if (cfg.K == 1) {
      sigma_tr.push_back(std::move(s));
      for (int j = 0; j < out.R; ++j) {
        beta_tr[static_cast<std::size_t>(j)].push_back(std::move(b[static_cast<std::size_t>(j)]));
      }
    }
    for (auto& d : r.draws) out.draws.push_back(std::move(d));
  }
  out.diagnostics.step_sizes["sigma"] = results.front().sigma_step;
  out.diagnostics.step_sizes["gamma"] = results.front().gamma_step;
  monitor_rhat(out.diagnostics, "gamma", gamma_tr, cfg.rhat_warning);
  monitor_rhat(out.diagnostics, "log_pseudo_likelihood", lpl_tr, cfg.rhat_warning);
  monitor_rhat(out.diagnostics, "occupied_components", occ_tr, cfg.rhat_warning);
  if (cfg.K == 1) {
    if (!cfg.fixed_sigma) monitor_rhat(out.diagnostics, "sigma[0]", sigma_tr, cfg.rhat_warning);
    for (int j = 0; j < out.R; ++j) {
      monitor_rhat(out.diagnostics, "beta[0," + std::to_string(j) + "]",
                   beta_tr[static_cast<std::size_t>(j)], cfg.rhat_warning);
    }
  }
  return out;
}

}  // namespace rwsynth
