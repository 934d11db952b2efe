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

// aucf: preprocess / train / eval / probe.
//
// Exit status: 0 success, 2 usage or configuration error, 3 data error,
// 4 numeric divergence during training.

#include <CLI11.hpp>

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "aucf/report.hpp"

namespace fs = std::filesystem;
using namespace aucf;

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kDiverged = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidRatios:
      return kUsage;
    case ErrorCode::DivergedGradient:
      return kDiverged;
    default:
      return kData;
  }
}

char parse_delimiter(const std::string& s) {
  if (s == "\\t" || s == "tab" || s == "\t") return '\t';
  if (s == "comma") return ',';
  if (s == "space") return ' ';
  if (s.size() != 1) throw Error(ErrorCode::InvalidConfig, "delimiter must be one character");
  return s[0];
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  for (auto field : detail::split_fields(text, ',')) {
    const auto k = detail::parse_number<std::size_t>(detail::trim(field));
    if (!k || *k == 0) throw Error(ErrorCode::InvalidConfig, "bad cutoff list '" + text + "'");
    ks.push_back(*k);
  }
  return ks;
}

/// Files written next to each other either all appear or none do.
class StagedOutputs {
 public:
  std::ofstream& open(const fs::path& target) {
    const fs::path tmp = target.string() + ".partial";
    files_.push_back({target, tmp});
    auto& out = streams_.emplace_back(tmp);
    if (!out) throw Error(ErrorCode::Unwritable, "cannot write " + target.string());
    return out;
  }
  void commit() {
    for (auto& s : streams_) {
      s.close();
      if (!s) throw Error(ErrorCode::Unwritable, "write failed");
    }
    for (const auto& [target, tmp] : files_) fs::rename(tmp, target);
    files_.clear();
  }
  ~StagedOutputs() {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f.second, ec);
  }

 private:
  std::vector<std::pair<fs::path, fs::path>> files_;
  std::deque<std::ofstream> streams_;
};

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string input, output, delimiter = "\\t";
  std::size_t k_core = 5;
  std::size_t user_column = 0, item_column = 1;
  int timestamp_column = -1;
};

int cmd_preprocess(const PreprocessArgs& a) {
  LineFormat fmt;
  fmt.delimiter = parse_delimiter(a.delimiter);
  fmt.user_column = a.user_column;
  fmt.item_column = a.item_column;
  fmt.timestamp_column = a.timestamp_column < 0
                             ? std::nullopt
                             : std::optional<std::size_t>(static_cast<std::size_t>(a.timestamp_column));
  const auto raw = load_interactions(a.input, fmt);
  const InteractionSet data = preprocess(raw, a.k_core);

  StagedOutputs staged;
  write_interactions(staged.open(a.output), data);
  write_id_map(staged.open(a.output + ".user_map"), data.user_keys);
  write_id_map(staged.open(a.output + ".item_map"), data.item_keys);
  staged.commit();

  std::printf("users %zu items %zu interactions %zu density %.6g\n", data.n_users(),
              data.n_items(), data.size(), data.density());
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out_dir;
  std::vector<std::string> overrides;
  bool no_wall_clock = false;
  bool quiet = false;
};

const std::vector<std::size_t> kDefaultKs = {10, 20, 50};

int cmd_train(const TrainArgs& a) {
  std::ifstream cfg_in(a.config);
  if (!cfg_in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + a.config);
  auto entries = parse_config_entries(cfg_in);
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value");
    std::string key(detail::trim(std::string_view(o).substr(0, eq)));
    std::string value(detail::trim(std::string_view(o).substr(eq + 1)));
    if (value.empty()) {
      entries.erase(key);  // "--set gamma=" drops the key
    } else {
      entries[key] = value;
    }
  }
  const TrainConfig cfg = config_from_entries(entries);

  const InteractionSet data = read_interaction_set(a.data);
  const DatasetSplit s = split(data, {}, cfg.seed);

  EpochObserver progress;
  if (!a.quiet) {
    progress = [](const EpochTrace& t) {
      std::fprintf(stderr, "epoch %zu loss %.6f align %.4f uniform %.4f/%.4f val_ndcg@20 %.4f\n",
                   t.epoch, t.train_loss, t.l_align, t.l_uniform_user, t.l_uniform_item,
                   t.val_ndcg20);
    };
  }
  TrainResult result = train(s, cfg, progress);
  if (a.no_wall_clock) {
    for (auto& t : result.trace) t.wall_seconds = 0.0;
  }

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  save_checkpoint(dir / "checkpoint", result, cfg);
  emit_trace(result.trace, dir / "trace.csv");

  const EmbeddingTable reps = result.model.representations();
  const GeometryReport geo = measure_geometry(reps, s.train);
  RunManifest m;
  m.config = format_config(cfg);
  m.n_users = data.n_users();
  m.n_items = data.n_items();
  m.n_interactions = data.size();
  m.content_hash = data.fingerprint();
  m.seed = cfg.seed;
  m.best_epoch = result.best_epoch;
  m.diagnostic = result.diagnostic;
  if (!s.validation.empty()) {
    m.validation_metrics = metrics_json(rank_eval(reps, s, Target::Validation, kDefaultKs), geo);
  }
  if (!s.test.empty()) {
    m.test_metrics = metrics_json(rank_eval(reps, s, Target::Test, kDefaultKs), geo);
  }
  m.artifacts["checkpoint"] = dir / "checkpoint";
  m.artifacts["embeddings"] = dir / "checkpoint" / "embeddings.txt";
  m.artifacts["trace"] = dir / "trace.csv";
  write_manifest(dir / "manifest.json", m);

  if (result.diagnostic) {
    std::fprintf(stderr, "aucf: training diverged (%s); kept epoch %zu\n",
                 result.diagnostic->c_str(), result.best_epoch);
    return kDiverged;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, split = "test", ks = "10,20,50", geometry_on = "train";
};

int cmd_eval(const EvalArgs& a) {
  const auto meta = load_checkpoint_meta(a.checkpoint);
  const EmbeddingTable reps = load_embeddings(fs::path(a.checkpoint) / "embeddings.txt");
  const InteractionSet data = read_interaction_set(a.data);
  if (reps.n_users() != static_cast<Eigen::Index>(data.n_users()) ||
      reps.n_items() != static_cast<Eigen::Index>(data.n_items())) {
    throw Error(ErrorCode::ShapeMismatch,
                "checkpoint has " + std::to_string(reps.n_users()) + " users / " +
                    std::to_string(reps.n_items()) + " items, data has " +
                    std::to_string(data.n_users()) + " / " + std::to_string(data.n_items()));
  }
  const DatasetSplit s = split(data, {}, meta.config.seed);
  const auto ks = parse_ks(a.ks);
  const Target target = a.split == "validation" ? Target::Validation : Target::Test;
  const GeometryReport geo = measure_geometry(reps, a.geometry_on == "all" ? data : s.train);
  std::cout << metrics_json(rank_eval(reps, s, target, ks), geo).dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ProbeArgs {
  std::string embeddings, interactions, delimiter = "\\t";
};

int cmd_probe(const ProbeArgs& a) {
  const EmbeddingTable reps = load_embeddings(a.embeddings);
  const InteractionSet data =
      read_interaction_set(a.interactions, parse_delimiter(a.delimiter),
                           static_cast<std::size_t>(reps.n_users()),
                           static_cast<std::size_t>(reps.n_items()));
  std::cout << geometry_json(measure_geometry(reps, data)).dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alignment/uniformity collaborative filtering toolkit"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "dedup, k-core filter and remap a raw interaction log");
  p->add_option("--input", pre.input, "raw interaction file")->required();
  p->add_option("--output", pre.output, "remapped interaction file (ID maps go next to it)")
      ->required();
  p->add_option("--delimiter", pre.delimiter, "field separator (\\t, comma, space or a character)");
  p->add_option("--k-core", pre.k_core, "minimum interactions per user and item")
      ->check(CLI::PositiveNumber);
  p->add_option("--user-column", pre.user_column);
  p->add_option("--item-column", pre.item_column);
  p->add_option("--timestamp-column", pre.timestamp_column, "-1 when absent");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "split, train and write checkpoint, trace and manifest");
  t->add_option("--data", tr.data, "preprocessed interaction file")->required();
  t->add_option("--config", tr.config, "key = value config file")->required();
  t->add_option("--out-dir", tr.out_dir)->required();
  t->add_option("--set", tr.overrides, "override a config key (key=value; key= removes it), repeatable");
  t->add_flag("--no-wall-clock", tr.no_wall_clock, "write 0 for wall_seconds in the trace");
  t->add_flag("--quiet", tr.quiet, "no per-epoch progress on stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "ranking metrics and geometry of a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint directory")->required();
  e->add_option("--data", ev.data, "the interaction file the checkpoint was trained on")
      ->required();
  e->add_option("--split", ev.split)->check(CLI::IsMember({"validation", "test"}));
  e->add_option("--ks", ev.ks, "comma-separated cutoffs");
  e->add_option("--geometry-on", ev.geometry_on, "train or all interactions")
      ->check(CLI::IsMember({"train", "all"}));

  ProbeArgs pr;
  auto* q = app.add_subcommand("probe", "geometry of an external embedding dump");
  q->add_option("--embeddings", pr.embeddings)->required();
  q->add_option("--interactions", pr.interactions, "integer-id interaction file")->required();
  q->add_option("--delimiter", pr.delimiter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*p) return cmd_preprocess(pre);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*q) return cmd_probe(pr);
  } catch (const Error& err) {
    std::fprintf(stderr, "aucf: %s\n", err.what());
    return exit_code(err.code());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "aucf: %s\n", err.what());
    return kData;
  }
  return kUsage;
}
