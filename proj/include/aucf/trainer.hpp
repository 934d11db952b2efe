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

// Mini-batch training of embedding-table (optionally graph-propagated)
// recommenders under DirectAU, BPR or dynamically sampled BPR, with early
// stopping on validation NDCG@20 and a per-epoch geometry trace.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "aucf/dataset.hpp"
#include "aucf/encoder.hpp"
#include "aucf/error.hpp"
#include "aucf/eval.hpp"
#include "aucf/loss.hpp"
#include "aucf/optimizer.hpp"
#include "aucf/rng.hpp"

namespace aucf {

enum class Objective { DirectAU, BPR, BPR_DS };
enum class EncoderKind { MF, LGCN };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::DirectAU: return "direct_au";
    case Objective::BPR: return "bpr";
    case Objective::BPR_DS: return "bpr_ds";
  }
  return "?";
}

inline std::string to_string(EncoderKind e) { return e == EncoderKind::MF ? "mf" : "lgcn"; }

struct TrainConfig {
  Objective objective = Objective::DirectAU;
  EncoderKind encoder = EncoderKind::MF;
  std::size_t layers = 0;  // LGCN only
  std::optional<double> gamma;
  std::size_t d = 64;
  double lr = 1e-3;
  std::size_t batch_size = 256;
  double weight_decay = 0.0;
  std::size_t max_epochs = 300;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::size_t ds_candidates = 32;
};

/// Raises InvalidConfig when the combination is not trainable.
inline void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (cfg.objective == Objective::DirectAU && !cfg.gamma) fail("gamma is required for direct_au");
  if (cfg.objective != Objective::DirectAU && cfg.gamma) {
    fail("gamma only applies to direct_au");
  }
  if (cfg.gamma && !(*cfg.gamma >= 0.0 && std::isfinite(*cfg.gamma))) fail("gamma must be >= 0");
  if (cfg.encoder == EncoderKind::LGCN && cfg.layers == 0) fail("lgcn needs layers >= 1");
  if (cfg.encoder == EncoderKind::MF && cfg.layers != 0) fail("layers only applies to lgcn");
  if (cfg.d == 0) fail("d must be > 0");
  if (!(cfg.lr > 0.0 && std::isfinite(cfg.lr))) fail("lr must be > 0");
  if (cfg.batch_size == 0) fail("batch_size must be > 0");
  if (!(cfg.weight_decay >= 0.0 && std::isfinite(cfg.weight_decay))) {
    fail("weight_decay must be >= 0");
  }
  if (cfg.patience == 0) fail("patience must be > 0");
  if (cfg.ds_candidates == 0) fail("ds_candidates must be > 0");
}

// ---------------------------------------------------------------------------
// Flat "key = value" config files. '#' starts a comment line.

namespace detail {

template <typename T>
T config_number(const std::string& key, const std::string& value) {
  const auto v = parse_number<T>(value);
  if (!v) throw Error(ErrorCode::InvalidConfig, key + ": cannot parse '" + value + "'");
  return *v;
}

}  // namespace detail

/// Builds a config from key/value pairs. Unknown keys are an error.
inline TrainConfig config_from_entries(const std::map<std::string, std::string>& entries) {
  TrainConfig cfg;
  for (const auto& [key, value] : entries) {
    using detail::config_number;
    if (key == "objective") {
      if (value == "direct_au") cfg.objective = Objective::DirectAU;
      else if (value == "bpr") cfg.objective = Objective::BPR;
      else if (value == "bpr_ds") cfg.objective = Objective::BPR_DS;
      else throw Error(ErrorCode::InvalidConfig, "objective: unknown '" + value + "'");
    } else if (key == "encoder") {
      if (value == "mf") cfg.encoder = EncoderKind::MF;
      else if (value == "lgcn") cfg.encoder = EncoderKind::LGCN;
      else throw Error(ErrorCode::InvalidConfig, "encoder: unknown '" + value + "'");
    } else if (key == "layers") {
      cfg.layers = config_number<std::size_t>(key, value);
    } else if (key == "gamma") {
      cfg.gamma = config_number<double>(key, value);
    } else if (key == "d") {
      cfg.d = config_number<std::size_t>(key, value);
    } else if (key == "lr") {
      cfg.lr = config_number<double>(key, value);
    } else if (key == "batch_size") {
      cfg.batch_size = config_number<std::size_t>(key, value);
    } else if (key == "weight_decay") {
      cfg.weight_decay = config_number<double>(key, value);
    } else if (key == "max_epochs") {
      cfg.max_epochs = config_number<std::size_t>(key, value);
    } else if (key == "patience") {
      cfg.patience = config_number<std::size_t>(key, value);
    } else if (key == "seed") {
      cfg.seed = config_number<std::uint64_t>(key, value);
    } else if (key == "ds_candidates") {
      cfg.ds_candidates = config_number<std::size_t>(key, value);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
    }
  }
  // lgcn without an explicit depth uses two layers
  if (cfg.encoder == EncoderKind::LGCN && !entries.contains("layers")) cfg.layers = 2;
  validate(cfg);
  return cfg;
}

/// Parses "key = value" lines. Duplicate keys within one file are an error.
inline std::map<std::string, std::string> parse_config_entries(std::istream& in) {
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(detail::trim(view.substr(0, eq)));
    const std::string value(detail::trim(view.substr(eq + 1)));
    if (!entries.emplace(key, value).second) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) +
                                                ": duplicate key '" + key + "'");
    }
  }
  return entries;
}

inline TrainConfig parse_config(std::istream& in) {
  return config_from_entries(parse_config_entries(in));
}

/// Canonical "key = value" echo; parse_config(format_config(c)) == c.
inline std::string format_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "objective = " << to_string(cfg.objective) << '\n';
  out << "encoder = " << to_string(cfg.encoder) << '\n';
  if (cfg.encoder == EncoderKind::LGCN) out << "layers = " << cfg.layers << '\n';
  if (cfg.gamma) out << "gamma = " << *cfg.gamma << '\n';
  out << "d = " << cfg.d << '\n';
  out << "lr = " << cfg.lr << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "weight_decay = " << cfg.weight_decay << '\n';
  out << "max_epochs = " << cfg.max_epochs << '\n';
  out << "patience = " << cfg.patience << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "ds_candidates = " << cfg.ds_candidates << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

struct EpochTrace {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double l_align = 0.0;         // full training data
  double l_uniform_user = 0.0;  // full training data
  double l_uniform_item = 0.0;  // full training data
  double val_ndcg20 = 0.0;      // NaN when there is no validation data
  double wall_seconds = 0.0;

  // Per-batch averages of the loss components (DirectAU only, not written
  // to the CSV trace).
  double batch_align = 0.0;
  double batch_uniform = 0.0;
};

/// Trainable parameters plus the fixed propagation graph, if any.
struct Model {
  EmbeddingTable base;
  std::optional<GraphPropagator> graph;

  /// The user/item representations used for scoring.
  EmbeddingTable representations() const { return graph ? graph->propagate(base) : base; }
};

inline Model make_model(const DatasetSplit& split, const TrainConfig& cfg) {
  Model m;
  m.base = init_xavier(split.n_users(), split.n_items(), cfg.d, cfg.seed);
  if (cfg.encoder == EncoderKind::LGCN) m.graph.emplace(split.train, cfg.layers);
  return m;
}

struct TrainResult {
  Model model;                   // parameters from the best epoch
  std::vector<EpochTrace> trace;
  std::size_t best_epoch = 0;    // 0 = initial parameters
  std::optional<std::string> diagnostic;  // set when training diverged
};

using EpochObserver = std::function<void(const EpochTrace&)>;

namespace detail {

inline RowGradients rows_with_gradient(const Matrix& dense) {
  RowGradients out;
  for (Eigen::Index r = 0; r < dense.rows(); ++r) {
    if (!dense.row(r).isZero(0.0)) out.rows.push_back(static_cast<Id>(r));
  }
  out.values.resize(static_cast<Eigen::Index>(out.rows.size()), dense.cols());
  for (std::size_t k = 0; k < out.rows.size(); ++k) {
    out.values.row(static_cast<Eigen::Index>(k)) = dense.row(out.rows[k]);
  }
  return out;
}

inline double val_ndcg20(const EmbeddingTable& reps, const DatasetSplit& split) {
  if (split.validation.empty()) return std::numeric_limits<double>::quiet_NaN();
  static constexpr std::size_t kCut[] = {20};
  return rank_eval(reps, split, Target::Validation, kCut).ndcg.at(20);
}

}  // namespace detail

/// Runs the training loop. Early stopping keeps the parameters of the epoch
/// with the highest validation NDCG@20 and stops after `patience` epochs
/// without a strict improvement; without validation data every epoch runs
/// and the last one is returned. A non-finite gradient or loss, or a
/// representation whose norm is zero or overflows, ends training with the
/// best parameters so far and a diagnostic.
inline TrainResult train(const DatasetSplit& split, const TrainConfig& cfg,
                         const EpochObserver& observer = {}) {
  validate(cfg);
  Model model = make_model(split, cfg);
  const auto d = static_cast<Eigen::Index>(cfg.d);
  AdamState user_opt(model.base.n_users(), d, cfg.lr, cfg.weight_decay);
  AdamState item_opt(model.base.n_items(), d, cfg.lr, cfg.weight_decay);
  Engine negative_rng = substream(cfg.seed, "negatives");
  const bool early_stopping = !split.validation.empty();
  const double gamma = cfg.gamma.value_or(0.0);

  TrainResult result;
  result.model = model;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = iter_batches(split, cfg.batch_size, cfg.seed, epoch);
    double loss_sum = 0.0, align_sum = 0.0, uniform_sum = 0.0;
    EpochTrace row;
    row.epoch = epoch;

    try {
      for (const auto& batch : batches) {
        const EmbeddingTable propagated =
            model.graph ? model.graph->propagate(model.base) : EmbeddingTable{};
        const EmbeddingTable& reps = model.graph ? propagated : model.base;
        auto [u, i] = forward_mf(reps, batch.users, batch.items);

        Matrix grad_u, grad_i, grad_neg;
        std::vector<Id> negatives;
        double value = 0.0;
        if (cfg.objective == Objective::DirectAU) {
          if (batch.size() >= 2) {
            DirectAUOutput out = direct_au_loss(u, i, gamma);
            value = out.value;
            align_sum += out.align;
            uniform_sum += (out.uniform_user + out.uniform_item) / 2.0;
            grad_u = std::move(out.grad_user);
            grad_i = std::move(out.grad_item);
          } else {
            // no in-batch pairs to spread; alignment only
            LossOutput out = align_loss(u, i);
            value = out.value;
            align_sum += out.value;
            grad_u = std::move(out.grad_user);
            grad_i = std::move(out.grad_item);
          }
        } else {
          const auto strategy = cfg.objective == Objective::BPR_DS ? NegativeStrategy::Dynamic
                                                                   : NegativeStrategy::Uniform;
          negatives = sample_negatives(split, batch.users, strategy, reps, cfg.ds_candidates,
                                       negative_rng);
          const Matrix neg = gather_rows(reps.item, negatives);
          LossOutput out = bpr_loss(u, i, neg, Score::Dot);
          value = out.value;
          grad_u = std::move(out.grad_user);
          grad_i = std::move(out.grad_item);
          grad_neg = std::move(out.grad_negative);
        }
        if (!std::isfinite(value)) throw Error(ErrorCode::DivergedGradient, "non-finite loss");
        loss_sum += value;

        RowGradients user_rows, item_rows;
        if (model.graph) {
          EmbeddingTable g{Matrix::Zero(model.base.n_users(), d),
                           Matrix::Zero(model.base.n_items(), d)};
          for (std::size_t k = 0; k < batch.size(); ++k) {
            g.user.row(batch.users[k]) += grad_u.row(static_cast<Eigen::Index>(k));
            g.item.row(batch.items[k]) += grad_i.row(static_cast<Eigen::Index>(k));
          }
          for (std::size_t k = 0; k < negatives.size(); ++k) {
            g.item.row(negatives[k]) += grad_neg.row(static_cast<Eigen::Index>(k));
          }
          const EmbeddingTable base_grad = model.graph->backward(g);
          user_rows = detail::rows_with_gradient(base_grad.user);
          item_rows = detail::rows_with_gradient(base_grad.item);
        } else {
          RowGradAccumulator ua(d), ia(d);
          ua.add_rows(batch.users, grad_u);
          ia.add_rows(batch.items, grad_i);
          if (!negatives.empty()) ia.add_rows(negatives, grad_neg);
          user_rows = ua.finish();
          item_rows = ia.finish();
        }
        // validate both before mutating either table
        if (!user_rows.values.allFinite() || !item_rows.values.allFinite()) {
          throw Error(ErrorCode::DivergedGradient, "non-finite gradient");
        }
        adam_step(user_opt, model.base.user, user_rows);
        adam_step(item_opt, model.base.item, item_rows);
      }

      const EmbeddingTable reps = model.representations();
      const double n_batches = static_cast<double>(std::max<std::size_t>(batches.size(), 1));
      row.train_loss = loss_sum / n_batches;
      row.batch_align = align_sum / n_batches;
      row.batch_uniform = uniform_sum / n_batches;
      const GeometryReport geo = measure_geometry(reps, split.train);
      row.l_align = geo.l_align;
      row.l_uniform_user = geo.l_uniform_user;
      row.l_uniform_item = geo.l_uniform_item;
      row.val_ndcg20 = detail::val_ndcg20(reps, split);
    } catch (const Error& e) {
      // Parameters whose norms overflow show up as degenerate rows once
      // they are normalized; both mean the run has blown up.
      if (e.code() != ErrorCode::DivergedGradient &&
          e.code() != ErrorCode::DegenerateEmbedding) {
        throw;
      }
      result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(row);
    if (observer) observer(row);

    if (!early_stopping) {
      result.model = model;
      result.best_epoch = epoch;
      continue;
    }
    if (row.val_ndcg20 > best) {
      best = row.val_ndcg20;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trace CSV. Values are written with 9 digits after the decimal point.

inline constexpr std::string_view kTraceHeader =
    "epoch,train_loss,l_align,l_uniform_user,l_uniform_item,val_ndcg20,wall_seconds";

inline void write_trace(std::ostream& out, const std::vector<EpochTrace>& trace) {
  out << kTraceHeader << '\n';
  out << std::fixed << std::setprecision(9);
  for (const auto& t : trace) {
    out << t.epoch << ',' << t.train_loss << ',' << t.l_align << ',' << t.l_uniform_user << ','
        << t.l_uniform_item << ',' << t.val_ndcg20 << ',' << t.wall_seconds << '\n';
  }
}

inline void emit_trace(const std::vector<EpochTrace>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Unwritable, "cannot write " + path.string());
  write_trace(out, trace);
  if (!out) throw Error(ErrorCode::Unwritable, "write failed for " + path.string());
}

inline std::vector<EpochTrace> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kTraceHeader) {
    throw Error(ErrorCode::MalformedLine, "line 1: not a trace header");
  }
  std::vector<EpochTrace> trace;
  std::size_t line_no = 1;
  auto number = [&line_no](std::string_view s) {
    s = detail::trim(s);
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    const auto v = detail::parse_number<double>(s);
    if (!v) throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no));
    return *v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_fields(line, ',');
    if (f.size() != 7) throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no));
    EpochTrace t;
    t.epoch = static_cast<std::size_t>(number(f[0]));
    t.train_loss = number(f[1]);
    t.l_align = number(f[2]);
    t.l_uniform_user = number(f[3]);
    t.l_uniform_item = number(f[4]);
    t.val_ndcg20 = number(f[5]);
    t.wall_seconds = number(f[6]);
    trace.push_back(t);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Checkpoints: <dir>/embeddings.txt holds the scoring representations (for
// LGCN the propagated ones), <dir>/base_embeddings.txt the raw LGCN table,
// and <dir>/checkpoint.meta a key = value echo of the config plus
// best_epoch.

struct CheckpointMeta {
  TrainConfig config;
  std::size_t best_epoch = 0;
};

inline void save_checkpoint(const std::filesystem::path& dir, const TrainResult& result,
                            const TrainConfig& cfg) {
  std::filesystem::create_directories(dir);
  save_embeddings(dir / "embeddings.txt", result.model.representations());
  if (result.model.graph) save_embeddings(dir / "base_embeddings.txt", result.model.base);
  std::ofstream meta(dir / "checkpoint.meta");
  if (!meta) throw Error(ErrorCode::Unwritable, "cannot write checkpoint metadata");
  meta << format_config(cfg) << "best_epoch = " << result.best_epoch << '\n';
}

inline CheckpointMeta load_checkpoint_meta(const std::filesystem::path& dir) {
  std::ifstream in(dir / "checkpoint.meta");
  if (!in) throw Error(ErrorCode::Unreadable, "cannot open " + (dir / "checkpoint.meta").string());
  auto entries = parse_config_entries(in);
  CheckpointMeta meta;
  const auto it = entries.find("best_epoch");
  if (it == entries.end()) throw Error(ErrorCode::InvalidConfig, "checkpoint without best_epoch");
  meta.best_epoch = detail::config_number<std::size_t>("best_epoch", it->second);
  entries.erase(it);
  meta.config = config_from_entries(entries);
  return meta;
}

}  // namespace aucf
