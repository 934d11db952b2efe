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

// Training objectives with analytic gradients w.r.t. the raw (unnormalized)
// batch representations.
//
//   align(U, I)      = mean_k ||u~_k - i~_k||^2
//   uniform(X)       = log mean_{j<k} exp(-2 ||x~_j - x~_k||^2)
//   direct_au(U, I)  = align(U, I) + gamma * (uniform(U) + uniform(I)) / 2
//   bpr(U, I+, I-)   = mean_k softplus(-(s(u_k, i+_k) - s(u_k, i-_k)))
//
// where x~ = x / ||x||. The normalization Jacobian is (I - x~ x~^T) / ||x||.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "aucf/dataset.hpp"
#include "aucf/encoder.hpp"
#include "aucf/error.hpp"
#include "aucf/rng.hpp"

namespace aucf {

/// Gaussian-potential scale in the uniformity term.
inline constexpr double kUniformityScale = 2.0;

struct LossOutput {
  double value = 0.0;
  Matrix grad_user;
  Matrix grad_item;
  Matrix grad_negative;  // BPR only
};

struct UniformOutput {
  double value = 0.0;
  Matrix grad;
};

struct DirectAUOutput : LossOutput {
  double align = 0.0;
  double uniform_user = 0.0;
  double uniform_item = 0.0;
};

enum class Score { Dot, Cosine };

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": batch shapes differ");
  }
}

/// Maps gradients w.r.t. normalized rows back onto the raw rows.
inline Matrix normalize_backward(const Matrix& raw, const Matrix& unit,
                                 const Matrix& grad_unit) {
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const double norm = raw.row(r).norm();
    const double radial = unit.row(r).dot(grad_unit.row(r));
    out.row(r) = (grad_unit.row(r) - radial * unit.row(r)) / norm;
  }
  return out;
}

/// softplus(x) = log(1 + e^x) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline LossOutput align_loss(const Matrix& users, const Matrix& items) {
  detail::require_same_shape(users, items, "align_loss");
  if (users.rows() < 1) throw Error(ErrorCode::InsufficientBatch, "align_loss needs n >= 1");
  const Matrix u = normalize_rows(users);
  const Matrix i = normalize_rows(items);
  const Matrix diff = u - i;
  const double n = static_cast<double>(users.rows());

  double sum = 0.0;
  for (Eigen::Index k = 0; k < diff.rows(); ++k) sum += diff.row(k).squaredNorm();

  const Matrix g = (2.0 / n) * diff;
  LossOutput out;
  out.value = sum / n;
  out.grad_user = detail::normalize_backward(users, u, g);
  out.grad_item = detail::normalize_backward(items, i, -g);
  return out;
}

/// In-batch uniformity over the n(n-1)/2 unordered pairs of distinct rows,
/// evaluated as a max-shifted log-mean-exp.
inline UniformOutput uniform_loss(const Matrix& reps) {
  const Eigen::Index n = reps.rows();
  if (n < 2) throw Error(ErrorCode::InsufficientBatch, "uniform_loss needs n >= 2");
  const Matrix x = normalize_rows(reps);

  std::vector<double> logits;
  logits.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j + 1; k < n; ++k) {
      const double a = -kUniformityScale * (x.row(j) - x.row(k)).squaredNorm();
      logits.push_back(a);
      max_logit = std::max(max_logit, a);
    }
  }
  double total = 0.0;
  for (double& a : logits) {
    a = std::exp(a - max_logit);
    total += a;
  }
  const double n_pairs = static_cast<double>(logits.size());

  // d value / d x~_j = sum_k softmax_jk * (-scale) * 2 (x~_j - x~_k)
  Matrix g = Matrix::Zero(n, reps.cols());
  std::size_t idx = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j + 1; k < n; ++k) {
      const double w = logits[idx++] / total;
      const auto step = (-2.0 * kUniformityScale * w) * (x.row(j) - x.row(k));
      g.row(j) += step;
      g.row(k) -= step;
    }
  }

  UniformOutput out;
  out.value = max_logit + std::log(total / n_pairs);
  out.grad = detail::normalize_backward(reps, x, g);
  return out;
}

/// Alignment plus gamma-weighted mean of user and item uniformity. Needs at
/// least two pairs.
inline DirectAUOutput direct_au_loss(const Matrix& users, const Matrix& items,
                                     double gamma) {
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "gamma must be >= 0");
  const LossOutput align = align_loss(users, items);
  DirectAUOutput out;
  out.align = align.value;
  out.value = align.value;
  out.grad_user = align.grad_user;
  out.grad_item = align.grad_item;

  const UniformOutput uu = uniform_loss(users);
  const UniformOutput ui = uniform_loss(items);
  out.uniform_user = uu.value;
  out.uniform_item = ui.value;
  out.value += gamma * (uu.value + ui.value) / 2.0;
  out.grad_user += (gamma / 2.0) * uu.grad;
  out.grad_item += (gamma / 2.0) * ui.grad;
  return out;
}

inline LossOutput bpr_loss(const Matrix& users, const Matrix& positives,
                           const Matrix& negatives, Score score = Score::Dot) {
  detail::require_same_shape(users, positives, "bpr_loss");
  detail::require_same_shape(users, negatives, "bpr_loss");
  const Eigen::Index n = users.rows();
  if (n < 1) throw Error(ErrorCode::InsufficientBatch, "bpr_loss needs n >= 1");

  Matrix u, p, q;
  if (score == Score::Cosine) {
    u = normalize_rows(users);
    p = normalize_rows(positives);
    q = normalize_rows(negatives);
  } else {
    u = users;
    p = positives;
    q = negatives;
  }

  LossOutput out;
  Matrix gu(n, users.cols()), gp(n, users.cols()), gq(n, users.cols());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double delta = u.row(k).dot(p.row(k)) - u.row(k).dot(q.row(k));
    sum += detail::softplus(-delta);
    // d softplus(-delta) / d delta = -sigmoid(-delta)
    const double c = -detail::sigmoid(-delta) / static_cast<double>(n);
    gu.row(k) = c * (p.row(k) - q.row(k));
    gp.row(k) = c * u.row(k);
    gq.row(k) = -c * u.row(k);
  }
  out.value = sum / static_cast<double>(n);
  if (score == Score::Cosine) {
    out.grad_user = detail::normalize_backward(users, u, gu);
    out.grad_item = detail::normalize_backward(positives, p, gp);
    out.grad_negative = detail::normalize_backward(negatives, q, gq);
  } else {
    out.grad_user = std::move(gu);
    out.grad_item = std::move(gp);
    out.grad_negative = std::move(gq);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Negative sampling against the training interactions.

enum class NegativeStrategy { Uniform, Dynamic };

/// One item outside `user`'s training history, uniformly at random.
inline Id sample_uniform_negative(const DatasetSplit& split, Id user, Engine& rng) {
  const auto n_items = split.n_items();
  const auto seen = split.train_index.items_of(user);
  if (seen.size() >= n_items) {
    throw Error(ErrorCode::NoNegativeAvailable,
                "user " + std::to_string(user) + " interacted with every item");
  }
  const std::size_t free = n_items - seen.size();
  if (seen.size() * 2 <= n_items) {
    while (true) {
      const auto item = static_cast<Id>(uniform_index(rng, n_items));
      if (!std::binary_search(seen.begin(), seen.end(), item)) return item;
    }
  }
  // Dense histories: pick the r-th non-interacted id directly.
  std::size_t r = uniform_index(rng, free);
  Id item = 0;
  auto it = seen.begin();
  for (;; ++item) {
    if (it != seen.end() && *it == item) {
      ++it;
      continue;
    }
    if (r == 0) return item;
    --r;
  }
}

/// Uniform: one non-interacted item per user. Dynamic: `candidates`
/// non-interacted items per user, one of which is chosen with probability
/// softmax(dot score) under the current representations `reps`.
inline std::vector<Id> sample_negatives(const DatasetSplit& split,
                                        std::span<const Id> users,
                                        NegativeStrategy strategy,
                                        const EmbeddingTable& reps,
                                        std::size_t candidates, Engine& rng) {
  std::vector<Id> out;
  out.reserve(users.size());
  if (strategy == NegativeStrategy::Uniform) {
    for (Id u : users) out.push_back(sample_uniform_negative(split, u, rng));
    return out;
  }
  if (candidates == 0) {
    throw Error(ErrorCode::InvalidConfig, "dynamic sampling needs >= 1 candidate");
  }
  std::vector<Id> pool(candidates);
  std::vector<double> weight(candidates);
  for (Id u : users) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates; ++c) {
      pool[c] = sample_uniform_negative(split, u, rng);
      weight[c] = reps.user.row(u).dot(reps.item.row(pool[c]));
      max_score = std::max(max_score, weight[c]);
    }
    double total = 0.0;
    for (double& w : weight) {
      w = std::exp(w - max_score);
      total += w;
    }
    double target = uniform01(rng) * total;
    std::size_t pick = candidates - 1;
    for (std::size_t c = 0; c < candidates; ++c) {
      target -= weight[c];
      if (target < 0.0) {
        pick = c;
        break;
      }
    }
    out.push_back(pool[pick]);
  }
  return out;
}

}  // namespace aucf
