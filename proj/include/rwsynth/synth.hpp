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

// Partially synthetic datasets drawn from the posterior predictive of a
// fitted pseudo posterior. Only the sensitive column is replaced.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rwsynth/data_model.hpp"
#include "rwsynth/design.hpp"
#include "rwsynth/error.hpp"
#include "rwsynth/mixture_sampler.hpp"
#include "rwsynth/nb_sampler.hpp"
#include "rwsynth/parallel.hpp"
#include "rwsynth/rng.hpp"

namespace rwsynth {

struct SyntheticSet {
  std::vector<Dataset> datasets;
  std::vector<std::size_t> draw_indices;  // retained-draw index behind each dataset
  std::uint64_t seed = 0;
  std::string family;

  std::size_t L() const { return datasets.size(); }
};

/// L indices spread evenly over D retained draws: floor((2l + 1) D / (2L)).
/// Strictly increasing whenever L <= D.
inline std::vector<std::size_t> evenly_spaced_indices(std::size_t D, std::size_t L) {
  if (L == 0) throw InputError("L must be >= 1");
  if (L > D) {
    throw InputError("L = " + std::to_string(L) + " exceeds the " + std::to_string(D) +
                     " retained draws");
  }
  std::vector<std::size_t> out(L);
  for (std::size_t l = 0; l < L; ++l) out[l] = (2 * l + 1) * D / (2 * L);
  return out;
}

/// Checks that every non-sensitive cell of `syn` equals the source.
inline bool is_partial_synthesis_of(const Dataset& syn, const Dataset& conf) {
  if (!(syn.schema() == conf.schema()) || syn.n() != conf.n()) return false;
  for (std::size_t i = 0; i < conf.n(); ++i) {
    if (syn.record(i).codes != conf.record(i).codes) return false;
  }
  return syn.id_labels() == conf.id_labels();
}

/// For each selected draw, z_i is redrawn from its full conditional given the
/// confidential y_i (on the model scale), then y*_i ~ N(x_i' beta_z, sigma_z^2)
/// and mapped back through `transform`. `X` must be the design used to fit.
inline SyntheticSet generate_mixture_synthetic(const MixtureDraws& draws, const Dataset& conf,
                                               const Eigen::MatrixXd& X,
                                               const SensitiveTransform& transform, std::size_t L,
                                               std::uint64_t seed) {
  if (X.rows() != static_cast<Eigen::Index>(conf.n())) {
    throw InputError("design matrix rows do not match the dataset");
  }
  if (draws.R != X.cols()) throw InputError("design matrix columns do not match the draws");
  SyntheticSet out;
  out.family = "mixture";
  out.seed = seed;
  out.draw_indices = evenly_spaced_indices(draws.draws.size(), L);
  std::vector<double> model_y(conf.n());
  for (std::size_t i = 0; i < conf.n(); ++i) model_y[i] = transform.forward(conf.record(i).y);

  std::vector<std::vector<double>> ys(L);
  parallel_for(L, [&](std::size_t l) {
    Rng rng = make_rng(seed, "synthesis", l);
    const auto& d = draws.draws[out.draw_indices[l]];
    auto& y = ys[l];
    y.resize(conf.n());
    for (std::size_t i = 0; i < conf.n(); ++i) {
      const auto row = X.row(static_cast<Eigen::Index>(i));
      const auto k = static_cast<Eigen::Index>(
          sample_z(model_y[i], row, d.pi, d.beta, d.sigma, rng));
      const double m = row.dot(d.beta.row(k));
      y[i] = transform.inverse(m + d.sigma(k) * std_normal(rng));
    }
  });
  out.datasets.reserve(L);
  for (auto& y : ys) out.datasets.push_back(conf.with_sensitive(y));
  return out;
}

/// y*_i ~ NB(mu, phi) for the selected draw, independently over records.
inline SyntheticSet generate_nb_synthetic(const NBDraws& draws, const Dataset& conf,
                                          std::size_t L, std::uint64_t seed) {
  SyntheticSet out;
  out.family = "negative_binomial";
  out.seed = seed;
  out.draw_indices = evenly_spaced_indices(draws.size(), L);
  std::vector<std::vector<double>> ys(L);
  parallel_for(L, [&](std::size_t l) {
    Rng rng = make_rng(seed, "synthesis", l);
    const std::size_t t = out.draw_indices[l];
    auto& y = ys[l];
    y.resize(conf.n());
    for (auto& v : y) v = negative_binomial_draw(draws.mu[t], draws.phi[t], rng);
  });
  out.datasets.reserve(L);
  for (auto& y : ys) out.datasets.push_back(conf.with_sensitive(y));
  return out;
}

}  // namespace rwsynth
