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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "aucf/encoder.hpp"
#include "aucf/error.hpp"

namespace aucf {

/// Gradient rows for a subset of a parameter matrix. Rows are unique and
/// ascending; `values.row(k)` belongs to parameter row `rows[k]`.
struct RowGradients {
  std::vector<Id> rows;
  Matrix values;

  std::size_t size() const { return rows.size(); }
};

/// Sums gradient contributions per parameter row (a batch may repeat ids).
class RowGradAccumulator {
 public:
  explicit RowGradAccumulator(Eigen::Index cols) : cols_(cols) {}

  template <typename Row>
  void add(Id row, const Row& grad) {
    auto [it, inserted] = slot_.try_emplace(row, sums_.size());
    if (inserted) sums_.push_back(Eigen::RowVectorXd::Zero(cols_));
    sums_[it->second] += grad;
  }

  /// Adds row k of `grads` into parameter row ids[k].
  void add_rows(std::span<const Id> ids, const Matrix& grads) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      add(ids[k], grads.row(static_cast<Eigen::Index>(k)));
    }
  }

  RowGradients finish() const {
    RowGradients out;
    out.rows.reserve(slot_.size());
    for (const auto& [row, _] : slot_) out.rows.push_back(row);
    std::sort(out.rows.begin(), out.rows.end());
    out.values.resize(static_cast<Eigen::Index>(out.rows.size()), cols_);
    for (std::size_t k = 0; k < out.rows.size(); ++k) {
      out.values.row(static_cast<Eigen::Index>(k)) = sums_[slot_.at(out.rows[k])];
    }
    return out;
  }

 private:
  Eigen::Index cols_;
  std::unordered_map<Id, std::size_t> slot_;
  std::vector<Eigen::RowVectorXd> sums_;
};

/// Lazy (row-sparse) Adam. Each parameter row keeps its own step counter, so
/// rows absent from a batch are neither moved nor aged.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2, added to the gradient before the moments

  Matrix m;
  Matrix v;
  std::vector<std::uint64_t> steps;

  AdamState() = default;
  AdamState(Eigen::Index rows, Eigen::Index cols, double lr_, double weight_decay_ = 0.0)
      : lr(lr_),
        weight_decay(weight_decay_),
        m(Matrix::Zero(rows, cols)),
        v(Matrix::Zero(rows, cols)),
        steps(static_cast<std::size_t>(rows), 0) {}
};

/// Applies one Adam update to the touched rows of `params`. Raises
/// DivergedGradient (leaving state and params untouched) on any non-finite
/// gradient entry.
inline void adam_step(AdamState& state, Matrix& params, const RowGradients& grads) {
  if (state.m.rows() != params.rows() || state.m.cols() != params.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  }
  if (grads.values.rows() != static_cast<Eigen::Index>(grads.rows.size()) ||
      (grads.size() > 0 && grads.values.cols() != params.cols())) {
    throw Error(ErrorCode::ShapeMismatch, "gradient rows do not match parameters");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads.rows[k] >= static_cast<std::size_t>(params.rows())) {
      throw Error(ErrorCode::OutOfRange, "gradient row " + std::to_string(grads.rows[k]));
    }
  }
  if (!grads.values.allFinite()) {
    throw Error(ErrorCode::DivergedGradient, "non-finite gradient");
  }

  for (std::size_t k = 0; k < grads.size(); ++k) {
    const Eigen::Index r = grads.rows[k];
    const auto t = static_cast<double>(++state.steps[static_cast<std::size_t>(r)]);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (Eigen::Index c = 0; c < params.cols(); ++c) {
      const double g = grads.values(static_cast<Eigen::Index>(k), c) +
                       state.weight_decay * params(r, c);
      double& m = state.m(r, c);
      double& v = state.v(r, c);
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g * g;
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      params(r, c) -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace aucf
