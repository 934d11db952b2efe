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

#include "aucf/trainer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "synthetic.hpp"

namespace aucf {
namespace {

const DatasetSplit& toy_split() {
  static const DatasetSplit s = split(synthetic::two_cluster(), {}, 1);
  return s;
}

TrainConfig small_config(Objective objective) {
  TrainConfig c;
  c.objective = objective;
  if (objective == Objective::DirectAU) c.gamma = 1.0;
  c.d = 8;
  c.lr = 1e-2;
  c.max_epochs = 5;
  c.seed = 11;
  return c;
}

double val_ndcg(const EmbeddingTable& reps, const DatasetSplit& s) {
  const std::vector<std::size_t> k = {20};
  return rank_eval(reps, s, Target::Validation, k).ndcg.at(20);
}

TEST(Train, ZeroEpochsReturnsInitialTable) {
  auto cfg = small_config(Objective::DirectAU);
  cfg.max_epochs = 0;
  const auto r = train(toy_split(), cfg);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.best_epoch, 0u);
  const auto init = init_xavier(toy_split().n_users(), toy_split().n_items(), cfg.d, cfg.seed);
  EXPECT_EQ(r.model.base.user, init.user);
  EXPECT_EQ(r.model.base.item, init.item);
}

TEST(Train, DeterministicGivenSeed) {
  for (auto obj : {Objective::DirectAU, Objective::BPR, Objective::BPR_DS}) {
    const auto cfg = small_config(obj);
    const auto a = train(toy_split(), cfg);
    const auto b = train(toy_split(), cfg);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t e = 0; e < a.trace.size(); ++e) {
      EXPECT_EQ(a.trace[e].train_loss, b.trace[e].train_loss);
      EXPECT_EQ(a.trace[e].l_align, b.trace[e].l_align);
      EXPECT_EQ(a.trace[e].l_uniform_user, b.trace[e].l_uniform_user);
      EXPECT_EQ(a.trace[e].val_ndcg20, b.trace[e].val_ndcg20);
    }
    EXPECT_EQ(a.model.base.user, b.model.base.user);
    EXPECT_EQ(a.model.base.item, b.model.base.item);
  }
}

TEST(Train, ReturnsBestValidationSnapshot) {
  auto cfg = small_config(Objective::BPR);
  cfg.max_epochs = 15;
  cfg.patience = 3;
  const auto r = train(toy_split(), cfg);
  ASSERT_FALSE(r.trace.empty());
  double best = -1.0;
  std::size_t arg = 0;
  for (const auto& t : r.trace) {
    if (t.val_ndcg20 > best) {
      best = t.val_ndcg20;
      arg = t.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, arg);
  EXPECT_EQ(val_ndcg(r.model.representations(), toy_split()), best);
}

TEST(Train, EarlyStoppingWithPatienceOne) {
  // a large step size makes the validation metric noisy enough to stall
  auto cfg = small_config(Objective::BPR);
  cfg.lr = 0.5;
  cfg.max_epochs = 50;
  cfg.patience = 1;
  const auto r = train(toy_split(), cfg);
  ASSERT_LT(r.trace.size(), cfg.max_epochs);
  ASSERT_GE(r.trace.size(), 2u);
  // every epoch but the last strictly improved; the last one did not
  for (std::size_t e = 1; e + 1 < r.trace.size(); ++e) {
    EXPECT_GT(r.trace[e].val_ndcg20, r.trace[e - 1].val_ndcg20);
  }
  EXPECT_LE(r.trace.back().val_ndcg20, r.trace[r.trace.size() - 2].val_ndcg20);
  EXPECT_EQ(r.best_epoch, r.trace.size() - 1);
}

TEST(Train, DirectAULossIsSumOfBatchComponents) {
  for (double gamma : {0.5, 1.0, 5.0}) {
    auto cfg = small_config(Objective::DirectAU);
    cfg.gamma = gamma;
    cfg.max_epochs = 3;
    for (const auto& t : train(toy_split(), cfg).trace) {
      EXPECT_NEAR(t.train_loss, t.batch_align + gamma * t.batch_uniform, 1e-9);
    }
  }
}

TEST(Train, TraceGeometryWithinBounds) {
  for (auto obj : {Objective::DirectAU, Objective::BPR, Objective::BPR_DS}) {
    for (auto enc : {EncoderKind::MF, EncoderKind::LGCN}) {
      auto cfg = small_config(obj);
      cfg.encoder = enc;
      cfg.layers = enc == EncoderKind::LGCN ? 2 : 0;
      cfg.max_epochs = 3;
      const auto r = train(toy_split(), cfg);
      ASSERT_EQ(r.trace.size(), 3u);
      EXPECT_FALSE(r.diagnostic);
      for (const auto& t : r.trace) {
        EXPECT_TRUE(std::isfinite(t.train_loss));
        EXPECT_GE(t.l_align, 0.0);
        EXPECT_LE(t.l_align, 4.0);
        for (double u : {t.l_uniform_user, t.l_uniform_item}) {
          EXPECT_GE(u, -8.0);
          EXPECT_LE(u, 0.0);
        }
        EXPECT_GE(t.val_ndcg20, 0.0);
        EXPECT_LE(t.val_ndcg20, 1.0);
      }
    }
  }
}

TEST(Train, DirectAUImprovesOverRandomEmbeddings) {
  auto cfg = small_config(Objective::DirectAU);
  cfg.d = 16;
  cfg.max_epochs = 30;
  const double before = val_ndcg(make_model(toy_split(), cfg).representations(), toy_split());
  const auto r = train(toy_split(), cfg);
  EXPECT_GT(val_ndcg(r.model.representations(), toy_split()), before);
}

TEST(Train, LgcnLearns) {
  auto cfg = small_config(Objective::BPR);
  cfg.encoder = EncoderKind::LGCN;
  cfg.layers = 2;
  cfg.max_epochs = 20;
  const double before = val_ndcg(make_model(toy_split(), cfg).representations(), toy_split());
  const auto r = train(toy_split(), cfg);
  EXPECT_GT(val_ndcg(r.model.representations(), toy_split()), before);
}

TEST(Train, SingletonBatchesFallBackToAlignment) {
  auto cfg = small_config(Objective::DirectAU);
  cfg.batch_size = 1;
  cfg.max_epochs = 1;
  const auto r = train(toy_split(), cfg);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].batch_uniform, 0.0);
  EXPECT_NEAR(r.trace[0].train_loss, r.trace[0].batch_align, 1e-12);
}

TEST(Train, WithoutValidationRunsEveryEpoch) {
  const auto s = split(synthetic::two_cluster(), {1.0, 0.0, 0.0}, 1);
  ASSERT_TRUE(s.validation.empty());
  auto cfg = small_config(Objective::BPR);
  cfg.patience = 1;
  cfg.max_epochs = 4;
  const auto r = train(s, cfg);
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_TRUE(std::isnan(r.trace[0].val_ndcg20));
  EXPECT_EQ(r.best_epoch, 4u);
}

TEST(Train, DivergenceKeepsLastGoodSnapshot) {
  auto cfg = small_config(Objective::BPR);
  cfg.lr = 1e300;
  const auto r = train(toy_split(), cfg);
  ASSERT_TRUE(r.diagnostic);
  EXPECT_NE(r.diagnostic->find("DivergedGradient"), std::string::npos);
  EXPECT_TRUE(r.model.base.all_finite());
  if (r.best_epoch == 0) {
    EXPECT_EQ(r.model.base.user, init_xavier(toy_split().n_users(), toy_split().n_items(),
                                             cfg.d, cfg.seed).user);
  }
}

// ---------------------------------------------------------------------------

TEST(Trace, HeaderOnlyAndLineCount) {
  std::ostringstream empty;
  write_trace(empty, {});
  EXPECT_EQ(empty.str(), std::string(kTraceHeader) + "\n");

  std::vector<EpochTrace> two(2);
  two[0].epoch = 1;
  two[1].epoch = 2;
  std::ostringstream out;
  write_trace(out, two);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Trace, RoundTripWithinTolerance) {
  auto cfg = small_config(Objective::DirectAU);
  cfg.max_epochs = 3;
  auto trace = train(toy_split(), cfg).trace;
  trace[1].val_ndcg20 = std::numeric_limits<double>::quiet_NaN();
  const auto path = std::filesystem::temp_directory_path() / "aucf_trace_test.csv";
  emit_trace(trace, path);
  std::ifstream in(path);
  const auto back = read_trace(in);
  ASSERT_EQ(back.size(), trace.size());
  for (std::size_t e = 0; e < trace.size(); ++e) {
    EXPECT_EQ(back[e].epoch, trace[e].epoch);
    EXPECT_NEAR(back[e].train_loss, trace[e].train_loss, 1e-9);
    EXPECT_NEAR(back[e].l_align, trace[e].l_align, 1e-9);
    EXPECT_NEAR(back[e].l_uniform_user, trace[e].l_uniform_user, 1e-9);
    EXPECT_NEAR(back[e].l_uniform_item, trace[e].l_uniform_item, 1e-9);
    EXPECT_NEAR(back[e].wall_seconds, trace[e].wall_seconds, 1e-9);
  }
  EXPECT_TRUE(std::isnan(back[1].val_ndcg20));
  std::filesystem::remove(path);

  EXPECT_THROW(emit_trace(trace, "/nonexistent-dir/trace.csv"), Error);
  std::istringstream bad("epoch,loss\n");
  EXPECT_THROW(read_trace(bad), Error);
}

// ---------------------------------------------------------------------------

TrainConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ErrorCode parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ErrorCode::Unreadable;
}

TEST(Config, ParsesKeysAndDefaults) {
  const auto c = parse("# comment\nobjective = direct_au\ngamma = 2\n\nd=32\nlr = 0.01\nseed = 9\n");
  EXPECT_EQ(c.objective, Objective::DirectAU);
  EXPECT_EQ(*c.gamma, 2.0);
  EXPECT_EQ(c.d, 32u);
  EXPECT_EQ(c.lr, 0.01);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.batch_size, 256u);
  EXPECT_EQ(c.max_epochs, 300u);
  EXPECT_EQ(c.patience, 10u);
  EXPECT_EQ(c.ds_candidates, 32u);
  EXPECT_EQ(parse("objective = bpr\nencoder = lgcn\n").layers, 2u);
  EXPECT_EQ(parse("objective = bpr\nencoder = lgcn\nlayers = 3\n").layers, 3u);
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_EQ(parse_error("objective = direct_au\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\ngamma = 1\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\nlearning_rate = 1\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\nd = 4\nd = 8\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\nd = four\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\nd = 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\nlr = 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\nlayers = 2\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = bpr\nencoder = lgcn\nlayers = 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = sgd\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective bpr\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error("objective = direct_au\ngamma = -1\n"), ErrorCode::InvalidConfig);
}

TEST(Config, FormatRoundTrips) {
  TrainConfig c = small_config(Objective::DirectAU);
  c.gamma = 0.1;
  c.lr = 1.0 / 3.0;
  c.encoder = EncoderKind::LGCN;
  c.layers = 3;
  const auto back = parse(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(*back.gamma, 0.1);
  EXPECT_EQ(back.lr, 1.0 / 3.0);
  EXPECT_EQ(back.layers, 3u);
}

// ---------------------------------------------------------------------------

TEST(Checkpoint, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "aucf_ckpt_test";
  std::filesystem::remove_all(dir);
  for (auto enc : {EncoderKind::MF, EncoderKind::LGCN}) {
    auto cfg = small_config(Objective::BPR);
    cfg.encoder = enc;
    cfg.layers = enc == EncoderKind::LGCN ? 1 : 0;
    cfg.max_epochs = 2;
    const auto r = train(toy_split(), cfg);
    save_checkpoint(dir, r, cfg);
    const auto meta = load_checkpoint_meta(dir);
    EXPECT_EQ(meta.best_epoch, r.best_epoch);
    EXPECT_EQ(format_config(meta.config), format_config(cfg));
    const auto reps = load_embeddings(dir / "embeddings.txt");
    const auto want = r.model.representations();
    EXPECT_EQ(reps.user, want.user);
    EXPECT_EQ(reps.item, want.item);
    EXPECT_EQ(std::filesystem::exists(dir / "base_embeddings.txt"), enc == EncoderKind::LGCN);
    std::filesystem::remove_all(dir);
  }
  EXPECT_THROW(load_checkpoint_meta(dir), Error);
}

}  // namespace
}  // namespace aucf
