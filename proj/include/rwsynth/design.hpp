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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rwsynth/data_model.hpp"
#include "rwsynth/error.hpp"

namespace rwsynth {

struct DesignMatrix {
  Eigen::MatrixXd X;                  // n x R, column 0 is the intercept
  std::vector<std::string> names;     // "(Intercept)", "Column=level", ...
};

/// Intercept plus treatment dummies for each categorical predictor; the
/// first declared level is the reference.
inline DesignMatrix build_design_matrix(const Dataset& ds,
                                        const std::vector<std::string>& predictors) {
  std::vector<std::size_t> cols;
  std::size_t R = 1;
  for (const auto& p : predictors) {
    const auto c = ds.schema().index_of(p);
    const auto& col = ds.schema().column(c);
    if (!col.is_categorical()) throw InputError("predictor '" + p + "' is not categorical");
    cols.push_back(c);
    R += col.levels.size() - 1;
  }
  DesignMatrix dm;
  dm.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.n()), static_cast<Eigen::Index>(R));
  dm.X.col(0).setOnes();
  dm.names.push_back("(Intercept)");
  Eigen::Index offset = 1;
  for (auto c : cols) {
    const auto& col = ds.schema().column(c);
    for (std::size_t l = 1; l < col.levels.size(); ++l) {
      dm.names.push_back(col.name + "=" + col.levels[l]);
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const int code = ds.code(i, c);
      if (code > 0) dm.X(static_cast<Eigen::Index>(i), offset + code - 1) = 1.0;
    }
    offset += static_cast<Eigen::Index>(col.levels.size()) - 1;
  }
  return dm;
}

/// Optional shifted-log scale for the sensitive value: the model sees
/// log(y + shift); draws are mapped back with exp(v) - shift.
struct SensitiveTransform {
  bool log = false;
  double shift = 0.0;

  double forward(double y) const {
    if (!log) return y;
    const double v = y + shift;
    if (!(v > 0.0)) {
      throw InputError("log transform needs y + shift > 0 (y = " + csv::format_double(y) +
                       ", shift = " + csv::format_double(shift) + ")");
    }
    return std::log(v);
  }

  double inverse(double v) const {
    if (!log) return v;
    const double y = std::exp(v) - shift;
    if (!std::isfinite(y)) throw NumericError("synthetic draw overflows on the natural scale");
    return y;
  }

  /// shift = 0 when every value is positive, else 1 - min(y).
  static SensitiveTransform log_for(const std::vector<double>& y) {
    double lo = y.empty() ? 1.0 : y.front();
    for (double v : y) lo = std::min(lo, v);
    return SensitiveTransform{true, lo > 0.0 ? 0.0 : 1.0 - lo};
  }
};

}  // namespace rwsynth
