// Copyright 2026 The aucf Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Slow, independent reference computations used only by the tests. None of
// these call into the code paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aucf/dataset.hpp"
#include "aucf/encoder.hpp"
#include "aucf/rng.hpp"

namespace aucf::oracle {

/// Central differences of a scalar function of one matrix argument.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, Matrix x,
                                double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double keep = x(r, c);
      x(r, c) = keep + h;
      const double up = f(x);
      x(r, c) = keep - h;
      const double down = f(x);
      x(r, c) = keep;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// max_k |a - b| / max(1, |b|)
inline double max_scaled_error(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double err =
          std::abs(analytic(r, c) - numeric(r, c)) / std::max(1.0, std::abs(numeric(r, c)));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline Eigen::RowVectorXd unit(const Eigen::RowVectorXd& v) { return v / v.norm(); }

/// Alignment by direct summation over the interaction list.
inline double naive_alignment(const EmbeddingTable& t, std::span<const Interaction> pairs) {
  double sum = 0.0;
  for (const auto& p : pairs) {
    const Eigen::RowVectorXd diff = unit(t.user.row(p.user)) - unit(t.item.row(p.item));
    sum += diff.squaredNorm();
  }
  return sum / static_cast<double>(pairs.size());
}

/// Uniformity over ordered pairs of distinct interactions, O(|R|^2 d):
/// log( 1/(|R|(|R|-1)) * sum_{a != b} exp(-2 |x(a) - x(b)|^2) ), evaluated on
/// the user side and on the item side.
inline std::pair<double, double> naive_uniformity(const EmbeddingTable& t,
                                                  std::span<const Interaction> pairs) {
  const std::size_t n = pairs.size();
  double su = 0.0, si = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const Eigen::RowVectorXd du =
          unit(t.user.row(pairs[a].user)) - unit(t.user.row(pairs[b].user));
      const Eigen::RowVectorXd di =
          unit(t.item.row(pairs[a].item)) - unit(t.item.row(pairs[b].item));
      su += std::exp(-2.0 * du.squaredNorm());
      si += std::exp(-2.0 * di.squaredNorm());
    }
  }
  const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
  return {std::log(su / denom), std::log(si / denom)};
}

/// k-core by deleting one under-populated entity at a time until none is
/// left; returns the surviving (user key, item key) pairs.
inline std::set<std::pair<std::string, std::string>> brute_force_k_core(
    const std::vector<std::pair<std::string, std::string>>& pairs, std::size_t k) {
  std::set<std::pair<std::string, std::string>> alive(pairs.begin(), pairs.end());
  while (true) {
    std::map<std::string, std::size_t> uc, ic;
    for (const auto& [u, i] : alive) {
      ++uc[u];
      ++ic[i];
    }
    std::optional<std::string> victim_user, victim_item;
    for (const auto& [u, c] : uc) {
      if (c < k) {
        victim_user = u;
        break;
      }
    }
    if (!victim_user) {
      for (const auto& [i, c] : ic) {
        if (c < k) {
          victim_item = i;
          break;
        }
      }
    }
    if (!victim_user && !victim_item) return alive;
    std::erase_if(alive, [&](const auto& p) {
      return (victim_user && p.first == *victim_user) || (victim_item && p.second == *victim_item);
    });
  }
}

}  // namespace aucf::oracle
