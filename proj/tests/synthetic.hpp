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

// Two-cluster toy data shared by the trainer, CLI and acceptance tests.
//
// Users and items are split into two clusters. Within a cluster both sit on
// a ring; a user picks `per_user` items from the `window` ring neighbours
// nearest to its own position, so neighbouring users share most items and
// the held-out items are predictable from the training ones.

#include <set>
#include <string>
#include <vector>

#include "aucf/dataset.hpp"
#include "aucf/rng.hpp"

namespace aucf::synthetic {

struct ClusterSpec {
  std::size_t n_users = 200;
  std::size_t n_items = 100;
  std::size_t per_user = 10;
  std::size_t window = 12;
  std::uint64_t seed = 7;
};

inline std::vector<Interaction> two_cluster_pairs(const ClusterSpec& shape = {}) {
  Engine rng = substream(shape.seed, "synthetic");
  const std::size_t users_per = shape.n_users / 2, items_per = shape.n_items / 2;
  std::vector<Interaction> out;
  for (std::size_t u = 0; u < shape.n_users; ++u) {
    const std::size_t c = std::min<std::size_t>(u / users_per, 1);
    const std::size_t pos = (u - c * users_per) * items_per / users_per;
    std::vector<Id> window;
    for (std::size_t k = 0; k < shape.window; ++k) {
      const std::size_t ring = (pos + items_per + k - shape.window / 2) % items_per;
      window.push_back(static_cast<Id>(c * items_per + ring));
    }
    shuffle(window, rng);
    for (std::size_t k = 0; k < shape.per_user && k < window.size(); ++k) {
      out.push_back({static_cast<Id>(u), window[k]});
    }
  }
  return out;
}

inline InteractionSet two_cluster(const ClusterSpec& shape = {}) {
  return InteractionSet(shape.n_users, shape.n_items, two_cluster_pairs(shape));
}

}  // namespace aucf::synthetic
