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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "aucf/dataset.hpp"
#include "aucf/error.hpp"
#include "aucf/rng.hpp"

namespace aucf {

/// Row-major so that one entity's representation is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Dense user and item representations, |U| x d and |I| x d.
struct EmbeddingTable {
  Matrix user;
  Matrix item;

  Eigen::Index dim() const { return user.cols(); }
  Eigen::Index n_users() const { return user.rows(); }
  Eigen::Index n_items() const { return item.rows(); }

  bool all_finite() const { return user.allFinite() && item.allFinite(); }
};

/// Xavier-uniform initialization: entries of each matrix are drawn from
/// U[-a, a] with a = sqrt(6 / (rows + d)). Users are drawn before items from
/// the "init" substream of `seed`.
inline EmbeddingTable init_xavier(std::size_t n_users, std::size_t n_items,
                                  std::size_t d, std::uint64_t seed) {
  if (d == 0) throw Error(ErrorCode::InvalidConfig, "dimension must be >= 1");
  Engine rng = substream(seed, "init");
  auto fill = [&rng, d](std::size_t rows) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + d));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(rng, -a, a);
    }
    return m;
  };
  EmbeddingTable t;
  t.user = fill(n_users);
  t.item = fill(n_items);
  return t;
}

/// Copies the requested rows, in order. Raises OutOfRange.
inline Matrix gather_rows(const Matrix& source, std::span<const Id> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), source.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= static_cast<std::size_t>(source.rows())) {
      throw Error(ErrorCode::OutOfRange,
                  "id " + std::to_string(ids[k]) + " >= " + std::to_string(source.rows()));
    }
    out.row(static_cast<Eigen::Index>(k)) = source.row(ids[k]);
  }
  return out;
}

/// Plain embedding-table lookup; rows are returned unnormalized.
inline std::pair<Matrix, Matrix> forward_mf(const EmbeddingTable& table,
                                            std::span<const Id> users,
                                            std::span<const Id> items) {
  return {gather_rows(table.user, users), gather_rows(table.item, items)};
}

/// Linear propagation over the symmetrically normalized user-item graph:
/// E(l+1) = A E(l), output = mean(E(0), ..., E(L)). Entity order in the
/// stacked matrix is users first, then items.
class GraphPropagator {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  GraphPropagator() = default;

  /// `train` must hold training interactions only.
  GraphPropagator(const InteractionSet& train, std::size_t n_layers)
      : n_users_(static_cast<Eigen::Index>(train.n_users())),
        n_items_(static_cast<Eigen::Index>(train.n_items())),
        n_layers_(n_layers) {
    const Eigen::Index n = n_users_ + n_items_;
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(train.size() * 2);
    const auto up = train.user_pop();
    const auto ip = train.item_pop();
    for (const auto& p : train.pairs()) {
      const double w = 1.0 / std::sqrt(static_cast<double>(up[p.user]) *
                                       static_cast<double>(ip[p.item]));
      const Eigen::Index r = p.user;
      const Eigen::Index c = n_users_ + p.item;
      entries.emplace_back(r, c, w);
      entries.emplace_back(c, r, w);
    }
    adjacency_.resize(n, n);
    adjacency_.setFromTriplets(entries.begin(), entries.end());
    adjacency_.makeCompressed();
  }

  std::size_t n_layers() const { return n_layers_; }
  const SparseMatrix& adjacency() const { return adjacency_; }

  /// mean(E0, A E0, ..., A^L E0) for a stacked (|U|+|I|) x d matrix. The
  /// operator is symmetric, so the same call maps output gradients back to
  /// base-embedding gradients.
  Matrix propagate(const Matrix& stacked) const {
    if (stacked.rows() != adjacency_.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "stacked rows do not match graph size");
    }
    Matrix layer = stacked;
    Matrix sum = stacked;
    for (std::size_t l = 0; l < n_layers_; ++l) {
      layer = adjacency_ * layer;
      sum += layer;
    }
    sum /= static_cast<double>(n_layers_ + 1);
    return sum;
  }

  /// Propagated user and item representations for the whole table.
  EmbeddingTable propagate(const EmbeddingTable& base) const {
    check_shape(base);
    Matrix stacked(n_users_ + n_items_, base.dim());
    stacked.topRows(n_users_) = base.user;
    stacked.bottomRows(n_items_) = base.item;
    const Matrix out = propagate(stacked);
    return {out.topRows(n_users_), out.bottomRows(n_items_)};
  }

  /// Chain rule through propagation: gradients w.r.t. the propagated
  /// tables become gradients w.r.t. the base tables.
  EmbeddingTable backward(const EmbeddingTable& grad_out) const {
    return propagate(grad_out);
  }

 private:
  void check_shape(const EmbeddingTable& t) const {
    if (t.n_users() != n_users_ || t.n_items() != n_items_) {
      throw Error(ErrorCode::ShapeMismatch, "embedding table does not match graph");
    }
  }

  Eigen::Index n_users_ = 0;
  Eigen::Index n_items_ = 0;
  std::size_t n_layers_ = 0;
  SparseMatrix adjacency_;
};

inline std::pair<Matrix, Matrix> forward_lgcn(const GraphPropagator& g,
                                              const EmbeddingTable& base,
                                              std::span<const Id> users,
                                              std::span<const Id> items) {
  return forward_mf(g.propagate(base), users, items);
}

/// Each row scaled to unit Euclidean norm. Zero-norm rows raise
/// DegenerateEmbedding.
inline Matrix normalize_rows(const Matrix& reps) {
  Matrix out(reps.rows(), reps.cols());
  for (Eigen::Index r = 0; r < reps.rows(); ++r) {
    const double norm = reps.row(r).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::DegenerateEmbedding,
                  "row " + std::to_string(r) + " has norm " + std::to_string(norm));
    }
    out.row(r) = reps.row(r) / norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dump format: "n_users n_items d", then one row per entity (users first),
// space-separated with 17 significant digits.

inline void write_embeddings(std::ostream& out, const EmbeddingTable& t) {
  out << t.n_users() << ' ' << t.n_items() << ' ' << t.dim() << '\n';
  out << std::setprecision(17);
  auto rows = [&out](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        out << m(r, c);
      }
      out << '\n';
    }
  };
  rows(t.user);
  rows(t.item);
}

inline EmbeddingTable read_embeddings(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) {
    throw Error(ErrorCode::MalformedLine, "missing embedding header");
  }
  std::istringstream hs(header);
  long long nu = -1, ni = -1, d = -1;
  std::string extra;
  if (!(hs >> nu >> ni >> d) || (hs >> extra) || nu < 0 || ni < 0 || d < 1) {
    throw Error(ErrorCode::MalformedLine,
                "line 1: header must be 'n_users n_items d'");
  }
  EmbeddingTable t;
  t.user.resize(nu, d);
  t.item.resize(ni, d);
  std::string line;
  auto read_rows = [&](Matrix& m, long long line_offset) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const auto line_no = std::to_string(line_offset + r);
      if (!std::getline(in, line)) {
        throw Error(ErrorCode::MalformedLine, "line " + line_no + ": missing row");
      }
      std::istringstream ls(line);
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::string tok;
        if (!(ls >> tok)) {
          throw Error(ErrorCode::MalformedLine, "line " + line_no + ": too few values");
        }
        const auto v = detail::parse_number<double>(tok);
        if (!v) throw Error(ErrorCode::MalformedLine, "line " + line_no + ": bad number");
        m(r, c) = *v;
      }
      if (ls >> extra) {
        throw Error(ErrorCode::MalformedLine, "line " + line_no + ": too many values");
      }
    }
  };
  read_rows(t.user, 2);
  read_rows(t.item, 2 + nu);
  return t;
}

inline void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& t) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Unwritable, "cannot write " + path.string());
  write_embeddings(out, t);
  if (!out) throw Error(ErrorCode::Unwritable, "write failed for " + path.string());
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Unreadable, "cannot open " + path.string());
  return read_embeddings(in);
}

}  // namespace aucf
