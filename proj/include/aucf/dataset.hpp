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

// Interaction logs: parsing, deduplication, k-core filtering, per-user
// train/validation/test splitting and positive-pair mini-batching.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aucf/error.hpp"
#include "aucf/rng.hpp"

namespace aucf {

using Id = std::uint32_t;

struct RawInteraction {
  std::string user_key;
  std::string item_key;
  std::optional<std::int64_t> timestamp;  // parsed but never used for modeling
};

/// Column layout of an interaction log. Lines starting with '#' and blank
/// lines are skipped.
struct LineFormat {
  char delimiter = '\t';
  std::size_t user_column = 0;
  std::size_t item_column = 1;
  std::optional<std::size_t> timestamp_column = 2;
};

struct Interaction {
  Id user;
  Id item;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\r' || c == '\n' || c == '\t';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

inline std::uint64_t pair_key(Id a, Id b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace detail

/// Parses an interaction log. Raises MalformedLine (with the 1-based line
/// number) and EmptyInput; duplicates are kept.
inline std::vector<RawInteraction> parse_interactions(std::istream& in,
                                                      const LineFormat& fmt) {
  std::vector<RawInteraction> out;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t needed =
      std::max(fmt.user_column, fmt.item_column) + 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (detail::trim(view).empty() || view.front() == '#') continue;
    const auto fields = detail::split_fields(view, fmt.delimiter);
    if (fields.size() < std::max<std::size_t>(needed, 2)) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": expected at least " +
                      std::to_string(std::max<std::size_t>(needed, 2)) +
                      " fields");
    }
    RawInteraction r;
    r.user_key = std::string(detail::trim(fields[fmt.user_column]));
    r.item_key = std::string(detail::trim(fields[fmt.item_column]));
    if (r.user_key.empty() || r.item_key.empty()) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": empty user or item");
    }
    if (fmt.timestamp_column && *fmt.timestamp_column < fields.size()) {
      const auto ts = detail::trim(fields[*fmt.timestamp_column]);
      if (!ts.empty()) {
        r.timestamp = detail::parse_number<std::int64_t>(ts);
        if (!r.timestamp) {
          throw Error(ErrorCode::MalformedLine,
                      "line " + std::to_string(line_no) +
                          ": timestamp is not an integer");
        }
      }
    }
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyInput, "no interactions found");
  return out;
}

inline std::vector<RawInteraction> load_interactions(
    const std::filesystem::path& path, const LineFormat& fmt = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Unreadable, "cannot open " + path.string());
  return parse_interactions(in, fmt);
}

/// Per-user sorted item lists (CSR layout).
class UserItemIndex {
 public:
  UserItemIndex() = default;

  UserItemIndex(std::size_t n_users, std::span<const Interaction> pairs)
      : offsets_(n_users + 1, 0) {
    for (const auto& p : pairs) ++offsets_[p.user + 1];
    for (std::size_t u = 0; u < n_users; ++u) offsets_[u + 1] += offsets_[u];
    items_.resize(pairs.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& p : pairs) items_[cursor[p.user]++] = p.item;
    for (std::size_t u = 0; u < n_users; ++u) {
      std::sort(items_.begin() + offsets_[u], items_.begin() + offsets_[u + 1]);
    }
  }

  std::size_t n_users() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  std::span<const Id> items_of(Id user) const {
    return {items_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
  }

  bool contains(Id user, Id item) const {
    const auto items = items_of(user);
    return std::binary_search(items.begin(), items.end(), item);
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Id> items_;
};

/// Deduplicated (user, item) pairs over contiguous ids, with popularity
/// tables p(u) and p(i).
class InteractionSet {
 public:
  InteractionSet() = default;

  /// Validates ranges and uniqueness. With `require_coverage`, every id in
  /// [0, n) must occur in at least one pair.
  InteractionSet(std::size_t n_users, std::size_t n_items,
                 std::vector<Interaction> pairs, bool require_coverage = true)
      : n_users_(n_users),
        n_items_(n_items),
        pairs_(std::move(pairs)),
        user_pop_(n_users, 0),
        item_pop_(n_items, 0) {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(pairs_.size() * 2);
    for (const auto& p : pairs_) {
      if (p.user >= n_users_ || p.item >= n_items_) {
        throw Error(ErrorCode::OutOfRange,
                    "pair (" + std::to_string(p.user) + "," +
                        std::to_string(p.item) + ") outside " +
                        std::to_string(n_users_) + "x" +
                        std::to_string(n_items_));
      }
      if (!seen.insert(detail::pair_key(p.user, p.item)).second) {
        throw Error(ErrorCode::MalformedLine,
                    "duplicate pair (" + std::to_string(p.user) + "," +
                        std::to_string(p.item) + ")");
      }
      ++user_pop_[p.user];
      ++item_pop_[p.item];
    }
    if (require_coverage) {
      const auto zero = [](std::size_t c) { return c == 0; };
      if (std::any_of(user_pop_.begin(), user_pop_.end(), zero) ||
          std::any_of(item_pop_.begin(), item_pop_.end(), zero)) {
        throw Error(ErrorCode::OutOfRange, "id without any interaction");
      }
    }
  }

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t size() const { return pairs_.size(); }
  std::span<const Interaction> pairs() const { return pairs_; }
  std::span<const std::size_t> user_pop() const { return user_pop_; }
  std::span<const std::size_t> item_pop() const { return item_pop_; }

  /// Original keys (index = remapped id); empty when the set was built from
  /// integer ids directly.
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;

  double density() const {
    if (n_users_ == 0 || n_items_ == 0) return 0.0;
    return static_cast<double>(pairs_.size()) /
           (static_cast<double>(n_users_) * static_cast<double>(n_items_));
  }

  /// FNV-1a over the id pairs in order; identifies the dataset content.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xFF;
        h *= 0x100000001B3ULL;
      }
    };
    mix(n_users_);
    mix(n_items_);
    for (const auto& p : pairs_) mix(detail::pair_key(p.user, p.item));
    return h;
  }

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Interaction> pairs_;
  std::vector<std::size_t> user_pop_;
  std::vector<std::size_t> item_pop_;
};

/// Dedup (first occurrence wins), iterative k-core filtering to a fixpoint,
/// then remapping of surviving keys to contiguous ids in first-seen order.
inline InteractionSet preprocess(std::span<const RawInteraction> raw,
                                 std::size_t k_core = 5) {
  if (raw.empty()) throw Error(ErrorCode::EmptyInput, "no interactions");

  std::unordered_map<std::string, Id> user_tmp, item_tmp;
  std::vector<const std::string*> user_names, item_names;
  auto intern = [](std::unordered_map<std::string, Id>& table,
                   std::vector<const std::string*>& names,
                   const std::string& key) {
    auto [it, inserted] = table.try_emplace(key, static_cast<Id>(names.size()));
    if (inserted) names.push_back(&it->first);
    return it->second;
  };

  std::vector<Interaction> pairs;
  pairs.reserve(raw.size());
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(raw.size() * 2);
  for (const auto& r : raw) {
    const Id u = intern(user_tmp, user_names, r.user_key);
    const Id i = intern(item_tmp, item_names, r.item_key);
    if (seen.insert(detail::pair_key(u, i)).second) pairs.push_back({u, i});
  }

  if (k_core > 1) {
    std::vector<std::size_t> ucount(user_names.size()), icount(item_names.size());
    while (true) {
      std::fill(ucount.begin(), ucount.end(), 0);
      std::fill(icount.begin(), icount.end(), 0);
      for (const auto& p : pairs) {
        ++ucount[p.user];
        ++icount[p.item];
      }
      const auto before = pairs.size();
      std::erase_if(pairs, [&](const Interaction& p) {
        return ucount[p.user] < k_core || icount[p.item] < k_core;
      });
      if (pairs.size() == before) break;
    }
  }
  if (pairs.empty()) {
    throw Error(ErrorCode::EmptyAfterFiltering,
                std::to_string(k_core) + "-core filtering removed everything");
  }

  constexpr Id kUnmapped = ~Id{0};
  std::vector<Id> user_map(user_names.size(), kUnmapped);
  std::vector<Id> item_map(item_names.size(), kUnmapped);
  std::vector<std::string> user_keys, item_keys;
  for (auto& p : pairs) {
    if (user_map[p.user] == kUnmapped) {
      user_map[p.user] = static_cast<Id>(user_keys.size());
      user_keys.push_back(*user_names[p.user]);
    }
    if (item_map[p.item] == kUnmapped) {
      item_map[p.item] = static_cast<Id>(item_keys.size());
      item_keys.push_back(*item_names[p.item]);
    }
    p = {user_map[p.user], item_map[p.item]};
  }

  InteractionSet out(user_keys.size(), item_keys.size(), std::move(pairs));
  out.user_keys = std::move(user_keys);
  out.item_keys = std::move(item_keys);
  return out;
}

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Per-user partition of an InteractionSet. `train` keeps the full id
/// ranges; an item whose every interaction was held out has p(i) = 0 there.
struct DatasetSplit {
  InteractionSet train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  std::uint64_t seed = 0;

  UserItemIndex train_index;
  UserItemIndex validation_index;
  UserItemIndex test_index;

  std::size_t n_users() const { return train.n_users(); }
  std::size_t n_items() const { return train.n_items(); }

  void build_indices() {
    train_index = UserItemIndex(train.n_users(), train.pairs());
    validation_index = UserItemIndex(train.n_users(), validation);
    test_index = UserItemIndex(train.n_users(), test);
  }
};

/// For every user independently: shuffle the user's interactions, send
/// floor(r_val * p(u)) to validation and floor(r_test * p(u)) to test, and
/// keep the rest for training. Pairs keep their source order within each
/// partition.
inline DatasetSplit split(const InteractionSet& data, const SplitRatios& ratios,
                          std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train < 0 ||
      ratios.validation < 0 || ratios.test < 0) {
    throw Error(ErrorCode::InvalidRatios, "split ratios must be >= 0 and sum to 1");
  }

  // Position of each pair within its user's list, in source order.
  std::vector<std::vector<std::size_t>> by_user(data.n_users());
  const auto pairs = data.pairs();
  for (std::size_t k = 0; k < pairs.size(); ++k) by_user[pairs[k].user].push_back(k);

  enum class Part : std::uint8_t { Train, Validation, Test };
  std::vector<Part> part(pairs.size(), Part::Train);
  Engine rng = substream(seed, "split");
  for (auto& idx : by_user) {
    const double p = static_cast<double>(idx.size());
    // the epsilon absorbs products like 0.1 * 30 = 3.0000000000000004 and
    // their mirror images just below an integer
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * p + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * p + 1e-9));
    shuffle(idx, rng);
    for (std::size_t k = 0; k < n_val && k < idx.size(); ++k) part[idx[k]] = Part::Validation;
    for (std::size_t k = n_val; k < n_val + n_test && k < idx.size(); ++k) {
      part[idx[k]] = Part::Test;
    }
  }

  DatasetSplit s;
  s.seed = seed;
  std::vector<Interaction> train;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    switch (part[k]) {
      case Part::Train: train.push_back(pairs[k]); break;
      case Part::Validation: s.validation.push_back(pairs[k]); break;
      case Part::Test: s.test.push_back(pairs[k]); break;
    }
  }
  s.train = InteractionSet(data.n_users(), data.n_items(), std::move(train),
                           /*require_coverage=*/false);
  s.train.user_keys = data.user_keys;
  s.train.item_keys = data.item_keys;
  s.build_indices();
  return s;
}

struct PositiveBatch {
  std::vector<Id> users;
  std::vector<Id> items;

  std::size_t size() const { return users.size(); }
};

/// Shuffles the training pairs with a generator derived from (seed, epoch)
/// and cuts them into batches; the last one may be short.
inline std::vector<PositiveBatch> iter_batches(const DatasetSplit& s,
                                               std::size_t batch_size,
                                               std::uint64_t seed,
                                               std::uint64_t epoch) {
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  const auto pairs = s.train.pairs();
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  Engine rng = substream(seed, "shuffle", epoch);
  shuffle(order, rng);

  std::vector<PositiveBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    PositiveBatch b;
    b.users.reserve(end - start);
    b.items.reserve(end - start);
    for (std::size_t k = start; k < end; ++k) {
      b.users.push_back(pairs[order[k]].user);
      b.items.push_back(pairs[order[k]].item);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Serialization of preprocessed data: "user<delim>item" with integer ids, and
// "id<delim>key" sidecar maps.

inline void write_interactions(std::ostream& out, const InteractionSet& data,
                               char delimiter = '\t') {
  for (const auto& p : data.pairs()) out << p.user << delimiter << p.item << '\n';
}

inline void write_id_map(std::ostream& out, std::span<const std::string> keys,
                         char delimiter = '\t') {
  for (std::size_t id = 0; id < keys.size(); ++id) {
    out << id << delimiter << keys[id] << '\n';
  }
}

/// Reads an integer-id interaction file. Counts default to max id + 1; when
/// given explicitly every id must fall below them.
inline InteractionSet read_interaction_set(
    std::istream& in, char delimiter = '\t',
    std::optional<std::size_t> n_users = std::nullopt,
    std::optional<std::size_t> n_items = std::nullopt) {
  LineFormat fmt;
  fmt.delimiter = delimiter;
  fmt.timestamp_column = std::nullopt;
  const auto raw = parse_interactions(in, fmt);
  std::vector<Interaction> pairs;
  pairs.reserve(raw.size());
  std::size_t max_u = 0, max_i = 0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const auto u = detail::parse_number<Id>(raw[k].user_key);
    const auto i = detail::parse_number<Id>(raw[k].item_key);
    if (!u || !i) {
      throw Error(ErrorCode::MalformedLine,
                  "interaction " + std::to_string(k + 1) + ": ids must be non-negative integers");
    }
    max_u = std::max<std::size_t>(max_u, *u);
    max_i = std::max<std::size_t>(max_i, *i);
    pairs.push_back({*u, *i});
  }
  const std::size_t nu = n_users.value_or(max_u + 1);
  const std::size_t ni = n_items.value_or(max_i + 1);
  if (max_u >= nu || max_i >= ni) {
    throw Error(ErrorCode::ShapeMismatch,
                "interaction ids exceed " + std::to_string(nu) + " users / " +
                    std::to_string(ni) + " items");
  }
  return InteractionSet(nu, ni, std::move(pairs), /*require_coverage=*/false);
}

inline InteractionSet read_interaction_set(
    const std::filesystem::path& path, char delimiter = '\t',
    std::optional<std::size_t> n_users = std::nullopt,
    std::optional<std::size_t> n_items = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Unreadable, "cannot open " + path.string());
  return read_interaction_set(in, delimiter, n_users, n_items);
}

}  // namespace aucf
