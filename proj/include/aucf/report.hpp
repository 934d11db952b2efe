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

// JSON views of metrics and run manifests.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aucf/dataset.hpp"
#include "aucf/error.hpp"
#include "aucf/eval.hpp"
#include "aucf/trainer.hpp"

namespace aucf {

/// {"recall": {"10": ..}, "ndcg": {..}, "l_align": .., "l_uniform": ..}
inline nlohmann::ordered_json metrics_json(const RankingMetrics& ranking,
                                           const GeometryReport& geometry) {
  nlohmann::ordered_json out;
  out["recall"] = nlohmann::ordered_json::object();
  out["ndcg"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : ranking.recall) out["recall"][std::to_string(k)] = v;
  for (const auto& [k, v] : ranking.ndcg) out["ndcg"][std::to_string(k)] = v;
  out["l_align"] = geometry.l_align;
  out["l_uniform"] = geometry.l_uniform;
  return out;
}

inline nlohmann::ordered_json geometry_json(const GeometryReport& g) {
  nlohmann::ordered_json out;
  out["l_align"] = g.l_align;
  out["l_uniform"] = g.l_uniform;
  out["l_uniform_user"] = g.l_uniform_user;
  out["l_uniform_item"] = g.l_uniform_item;
  return out;
}

struct RunManifest {
  std::string config;  // format_config echo
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_interactions = 0;
  std::uint64_t content_hash = 0;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  std::optional<std::string> diagnostic;
  nlohmann::ordered_json validation_metrics;
  nlohmann::ordered_json test_metrics;
  std::map<std::string, std::filesystem::path> artifacts;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json out;
    out["config"] = config;
    out["dataset"] = {{"n_users", n_users},
                      {"n_items", n_items},
                      {"n_interactions", n_interactions},
                      {"content_hash", content_hash}};
    out["seed"] = seed;
    out["best_epoch"] = best_epoch;
    if (diagnostic) out["diagnostic"] = *diagnostic;
    out["metrics"] = {{"validation", validation_metrics}, {"test", test_metrics}};
    out["artifacts"] = nlohmann::ordered_json::object();
    for (const auto& [name, path] : artifacts) out["artifacts"][name] = path.string();
    return out;
  }
};

/// Writes the manifest after checking that every artifact it names exists.
inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  for (const auto& [name, artifact] : m.artifacts) {
    if (!std::filesystem::exists(artifact)) {
      throw Error(ErrorCode::Unwritable,
                  "manifest artifact '" + name + "' missing: " + artifact.string());
    }
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Unwritable, "cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
}

}  // namespace aucf
