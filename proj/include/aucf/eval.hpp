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

// Full-ranking top-K evaluation and geometry of learned representations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "aucf/dataset.hpp"
#include "aucf/encoder.hpp"
#include "aucf/error.hpp"
#include "aucf/loss.hpp"
#include "aucf/rng.hpp"

namespace aucf {

enum class Target { Validation, Test };

struct RankingMetrics {
  std::map<std::size_t, double> recall;
  std::map<std::size_t, double> ndcg;
  std::size_t n_users_evaluated = 0;
};

/// Ranks every item a user has not trained on by dot product (ties broken
/// by ascending item id) and scores the held-out items of `target`. Users
/// without held-out items are skipped.
inline RankingMetrics rank_eval(const EmbeddingTable& reps, const DatasetSplit& split,
                                Target target, std::span<const std::size_t> ks) {
  if (ks.empty()) throw Error(ErrorCode::InvalidConfig, "no cutoffs given");
  if (std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end()) {
    throw Error(ErrorCode::InvalidConfig, "cutoffs must be >= 1");
  }
  if (reps.n_users() != static_cast<Eigen::Index>(split.n_users()) ||
      reps.n_items() != static_cast<Eigen::Index>(split.n_items())) {
    throw Error(ErrorCode::ShapeMismatch, "representations do not match dataset");
  }
  const UserItemIndex& targets =
      target == Target::Validation ? split.validation_index : split.test_index;
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  const std::size_t n_items = split.n_items();

  std::vector<double> log_discount(max_k + 1);
  for (std::size_t r = 1; r <= max_k; ++r) {
    log_discount[r] = 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }

  RankingMetrics out;
  for (std::size_t k : ks) {
    out.recall[k] = 0.0;
    out.ndcg[k] = 0.0;
  }

  constexpr Eigen::Index kBlock = 256;
  std::vector<Id> candidates;
  candidates.reserve(n_items);
  std::vector<char> hit;
  for (Eigen::Index start = 0; start < reps.n_users(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, reps.n_users() - start);
    const Matrix scores = reps.user.middleRows(start, rows) * reps.item.transpose();
    for (Eigen::Index b = 0; b < rows; ++b) {
      const auto u = static_cast<Id>(start + b);
      const auto truth = targets.items_of(u);
      if (truth.empty()) continue;

      const auto seen = split.train_index.items_of(u);
      candidates.clear();
      auto it = seen.begin();
      for (Id i = 0; i < n_items; ++i) {
        if (it != seen.end() && *it == i) {
          ++it;
          continue;
        }
        candidates.push_back(i);
      }
      const std::size_t top = std::min(max_k, candidates.size());
      const auto row = scores.row(b);
      std::partial_sort(candidates.begin(), candidates.begin() + top, candidates.end(),
                        [&row](Id a, Id c) {
                          const double sa = row(a), sc = row(c);
                          return sa > sc || (sa == sc && a < c);
                        });

      hit.assign(top, 0);
      for (std::size_t r = 0; r < top; ++r) {
        hit[r] = std::binary_search(truth.begin(), truth.end(), candidates[r]);
      }
      for (std::size_t k : ks) {
        double hits = 0.0, dcg = 0.0, idcg = 0.0;
        for (std::size_t r = 0; r < std::min(k, top); ++r) {
          if (hit[r]) {
            hits += 1.0;
            dcg += log_discount[r + 1];
          }
        }
        for (std::size_t r = 1; r <= std::min(k, truth.size()); ++r) idcg += log_discount[r];
        out.recall[k] += hits / static_cast<double>(truth.size());
        out.ndcg[k] += dcg / idcg;
      }
      ++out.n_users_evaluated;
    }
  }
  if (out.n_users_evaluated == 0) {
    throw Error(ErrorCode::NothingToEvaluate, "no user has held-out items");
  }
  const double n = static_cast<double>(out.n_users_evaluated);
  for (auto& [_, v] : out.recall) v /= n;
  for (auto& [_, v] : out.ndcg) v /= n;
  return out;
}

namespace detail {

/// Unit-normalized copies of the rows whose popularity is non-zero; other
/// rows are left as zeros and never read.
inline Matrix unit_rows_in_use(const Matrix& m, std::span<const std::size_t> pop) {
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (pop[static_cast<std::size_t>(r)] == 0) continue;
    const double norm = m.row(r).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::DegenerateEmbedding,
                  "row " + std::to_string(r) + " has norm " + std::to_string(norm));
    }
    out.row(r) = m.row(r) / norm;
  }
  return out;
}

inline void require_match(const EmbeddingTable& reps, const InteractionSet& data) {
  if (reps.n_users() != static_cast<Eigen::Index>(data.n_users()) ||
      reps.n_items() != static_cast<Eigen::Index>(data.n_items())) {
    throw Error(ErrorCode::ShapeMismatch,
                "table is " + std::to_string(reps.n_users()) + "x" +
                    std::to_string(reps.n_items()) + ", interactions cover " +
                    std::to_string(data.n_users()) + "x" + std::to_string(data.n_items()));
  }
}

/// log of the mean Gaussian potential over ordered pairs of distinct
/// interactions, taking one side (user or item) of each interaction.
///
/// Interactions sharing an entity contribute exp(0) = 1, so the distinct-pair
/// sum splits into
///   sum_{a != b} p(a) p(b) exp(-2 |x_a - x_b|^2)  +  sum_a p(a) (p(a) - 1)
/// over entities, which costs O(n_entities^2 d) instead of O(|R|^2 d).
inline double popularity_weighted_uniformity(const Matrix& unit,
                                             std::span<const std::size_t> pop,
                                             std::size_t n_interactions) {
  std::vector<Eigen::Index> used;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    if (pop[r] > 0) used.push_back(static_cast<Eigen::Index>(r));
  }
  const auto n = static_cast<Eigen::Index>(used.size());
  Matrix x(n, unit.cols());
  Vector w(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    x.row(a) = unit.row(used[static_cast<std::size_t>(a)]);
    w(a) = static_cast<double>(pop[static_cast<std::size_t>(used[static_cast<std::size_t>(a)])]);
  }

  double same_entity = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) same_entity += w(a) * (w(a) - 1.0);

  constexpr Eigen::Index kBlock = 512;
  double cross = 0.0;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    const Matrix gram = x.middleRows(start, rows) * x.transpose();
    for (Eigen::Index a = 0; a < rows; ++a) {
      const Eigen::Index ga = start + a;
      double acc = 0.0;
      for (Eigen::Index b = 0; b < n; ++b) {
        if (b == ga) continue;
        // |x_a - x_b|^2 = 2 - 2 <x_a, x_b> for unit rows
        const double dist2 = std::max(0.0, 2.0 - 2.0 * gram(a, b));
        acc += w(b) * std::exp(-kUniformityScale * dist2);
      }
      cross += w(ga) * acc;
    }
  }
  const double r = static_cast<double>(n_interactions);
  return std::log((cross + same_entity) / (r * (r - 1.0)));
}

}  // namespace detail

/// Mean over (u, i) in `data` of |u~ - i~|^2.
inline double measure_alignment(const EmbeddingTable& reps, const InteractionSet& data) {
  detail::require_match(reps, data);
  if (data.size() == 0) throw Error(ErrorCode::InsufficientData, "no interactions");
  const Matrix u = detail::unit_rows_in_use(reps.user, data.user_pop());
  const Matrix i = detail::unit_rows_in_use(reps.item, data.item_pop());
  double sum = 0.0;
  for (const auto& p : data.pairs()) sum += (u.row(p.user) - i.row(p.item)).squaredNorm();
  return sum / static_cast<double>(data.size());
}

struct UniformityReport {
  double user = 0.0;
  double item = 0.0;
  double combined = 0.0;  // (user + item) / 2
};

/// Uniformity of the user side and of the item side where the pair
/// distribution is "two distinct interactions drawn from `data`", computed
/// exactly through popularity weights.
inline UniformityReport measure_uniformity(const EmbeddingTable& reps,
                                           const InteractionSet& data) {
  detail::require_match(reps, data);
  if (data.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least 2 interactions");
  UniformityReport out;
  out.user = detail::popularity_weighted_uniformity(
      detail::unit_rows_in_use(reps.user, data.user_pop()), data.user_pop(), data.size());
  out.item = detail::popularity_weighted_uniformity(
      detail::unit_rows_in_use(reps.item, data.item_pop()), data.item_pop(), data.size());
  out.combined = (out.user + out.item) / 2.0;
  return out;
}

struct GeometryReport {
  double l_align = 0.0;
  double l_uniform = 0.0;
  double l_uniform_user = 0.0;
  double l_uniform_item = 0.0;
};

inline GeometryReport measure_geometry(const EmbeddingTable& reps, const InteractionSet& data) {
  const UniformityReport uni = measure_uniformity(reps, data);
  return {measure_alignment(reps, data), uni.combined, uni.user, uni.item};
}

// ---------------------------------------------------------------------------
// Monte Carlo check that perfectly aligned, uniformly spread representations
// attain the lower bound of the cosine-score BPR loss,
//   -1 + E_{x,y ~ uniform sphere} log(e + exp(x^T y)),
// and that breaking either property lifts the loss above it.

enum class SpherePerturbation {
  None,         // items equal their users, users uniform on the sphere
  Misalign,     // item = normalize(user + strength * z), z uniform on the sphere
  Antipodal,    // item = -user
  Concentrate,  // users = normalize(c + strength * z) around one pole c
  Collapse,     // every user (and item) at the same point
};

struct HarnessConfig {
  SpherePerturbation kind = SpherePerturbation::None;
  double strength = 0.0;
};

struct HarnessResult {
  double measured_bpr = 0.0;
  double measured_se = 0.0;
  double bound = 0.0;
  double bound_se = 0.0;
};

inline Eigen::RowVectorXd random_unit_vector(std::size_t d, Engine& rng) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(d));
  do {
    for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = normal01(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

inline HarnessResult bpr_bound_harness(std::size_t d, std::size_t n_samples, Engine& rng,
                                       const HarnessConfig& config = {}) {
  if (d < 2) throw Error(ErrorCode::InvalidConfig, "harness needs d >= 2");
  if (n_samples < 1000) throw Error(ErrorCode::InvalidConfig, "harness needs >= 1000 samples");

  const auto n = static_cast<Eigen::Index>(n_samples);
  const auto dim = static_cast<Eigen::Index>(d);
  const Eigen::RowVectorXd pole = random_unit_vector(d, rng);

  Matrix users(n, dim), items(n, dim);
  for (Eigen::Index k = 0; k < n; ++k) {
    switch (config.kind) {
      case SpherePerturbation::Concentrate: {
        Eigen::RowVectorXd v = pole + config.strength * random_unit_vector(d, rng);
        users.row(k) = v / v.norm();
        break;
      }
      case SpherePerturbation::Collapse:
        users.row(k) = pole;
        break;
      default:
        users.row(k) = random_unit_vector(d, rng);
    }
    switch (config.kind) {
      case SpherePerturbation::Misalign: {
        Eigen::RowVectorXd v = users.row(k) + config.strength * random_unit_vector(d, rng);
        items.row(k) = v / v.norm();
        break;
      }
      case SpherePerturbation::Antipodal:
        items.row(k) = -users.row(k);
        break;
      default:
        items.row(k) = users.row(k);
    }
  }

  auto mean_and_se = [](const std::vector<double>& xs) {
    const double n_ = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n_;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(ss / (n_ - 1.0) / n_)};
  };

  // Each user's negative is another sample's item, drawn uniformly.
  std::vector<double> losses(n_samples);
  for (Eigen::Index k = 0; k < n; ++k) {
    auto j = static_cast<Eigen::Index>(uniform_index(rng, n_samples - 1));
    if (j >= k) ++j;
    const double delta = users.row(k).dot(items.row(k)) - users.row(k).dot(items.row(j));
    losses[static_cast<std::size_t>(k)] = detail::softplus(-delta);
  }

  std::vector<double> terms(n_samples);
  const double e = std::exp(1.0);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const auto x = random_unit_vector(d, rng);
    const auto y = random_unit_vector(d, rng);
    terms[k] = -1.0 + std::log(e + std::exp(x.dot(y)));
  }

  HarnessResult out;
  std::tie(out.measured_bpr, out.measured_se) = mean_and_se(losses);
  std::tie(out.bound, out.bound_se) = mean_and_se(terms);
  return out;
}

}  // namespace aucf
