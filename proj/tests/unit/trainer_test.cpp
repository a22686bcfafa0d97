// Copyright 2026 The hngfn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hngfn/trainer.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "hngfn/objectives.hpp"

namespace hngfn {
namespace {

FlowModelConfig small(Conditioning c) {
  FlowModelConfig cfg;
  cfg.conditioning = c;
  cfg.trunk_width = 16;
  cfg.trunk_depth = 2;
  cfg.head_hidden = 8;
  cfg.hyper_width = 8;
  cfg.hyper_depth = 2;
  return cfg;
}

std::vector<PreferenceVector> two_targets() {
  return {PreferenceVector{0.25, 0.75}, PreferenceVector{0.75, 0.25}};
}

RewardFn oracle_reward(const Environment& env, const TrainConfig& cfg) {
  auto oracle = SyntheticOracle::reference(env, 2);
  return [&env, cfg, oracle](const PreferenceVector& lam, const State& x) {
    return shape_reward(scalarize_ws(lam, oracle.evaluate(env, x)), cfg);
  };
}

TEST(ShapeReward, Examples) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(shape_reward(1.0, cfg), 1.0);
  EXPECT_DOUBLE_EQ(shape_reward(0.5, cfg), 0.00390625);
  EXPECT_DOUBLE_EQ(shape_reward(-0.3, cfg), 1e-4);
  EXPECT_DOUBLE_EQ(shape_reward(7.0, cfg), 1.0);
  EXPECT_THROW(shape_reward(std::nan(""), cfg), NumericError);
}

TEST(ReplayBuffer, KeepsTopDistinctStatesLikeBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cap = 1 + uniform_index(rng, 12);
    ReplayBuffer buf(PreferenceVector{0.5, 0.5}, cap);
    // Oracle: best reward per state and the order states were first seen.
    std::map<State, double> best;
    std::map<State, int> first;
    int seq = 0;
    for (int i = 0; i < 200; ++i) {
      State x{{int(uniform_index(rng, 6)), int(uniform_index(rng, 6))}, true};
      const double r = 0.5 * double(1 + uniform_index(rng, 8));  // many ties
      buf.insert(x, r);
      if (!first.count(x)) first[x] = seq++;
      best[x] = std::max(best[x], r);
    }
    // States that were ever evicted can come back, so compare against the
    // sorted (reward desc, first seen asc) list restricted to the capacity.
    std::vector<std::pair<State, double>> all(best.begin(), best.end());
    std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return first[a.first] < first[b.first];
    });
    all.resize(std::min(all.size(), cap));
    ASSERT_EQ(buf.size(), all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      EXPECT_EQ(buf.entries()[i].state, all[i].first);
      EXPECT_EQ(buf.entries()[i].reward, all[i].second);
    }
  }
}

TEST(ReplayBuffer, RejectsNonPositiveRewardsAndAveragesTop) {
  ReplayBuffer buf(PreferenceVector{1.0, 0.0}, 3);
  EXPECT_THROW(buf.insert(State{{0}, true}, 0.0), ContractViolation);
  buf.insert(State{{1}, true}, 1.0);
  buf.insert(State{{2}, true}, 3.0);
  EXPECT_DOUBLE_EQ(buf.mean_top(1), 3.0);
  EXPECT_DOUBLE_EQ(buf.mean_top(20), 2.0);
}

TEST(Preferences, MixtureFrequencies) {
  TrainConfig cfg;
  cfg.targets = two_targets();
  Rng rng(2);
  cfg.hindsight_gamma = 0.0;
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(sample_preference(cfg, rng).source, PreferenceSource::kDirichlet);
  }
  cfg.hindsight_gamma = 1.0;
  for (int i = 0; i < 1000; ++i) {
    auto d = sample_preference(cfg, rng);
    EXPECT_EQ(d.source, PreferenceSource::kHindsight);
    EXPECT_EQ(d.lambda, cfg.targets[d.target]);
  }
  cfg.hindsight_gamma = 0.2;
  int hindsight = 0;
  for (int i = 0; i < 20000; ++i) {
    hindsight += sample_preference(cfg, rng).source == PreferenceSource::kHindsight;
  }
  EXPECT_NEAR(hindsight / 20000.0, 0.2, 0.01);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.targets = two_targets();
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.hindsight_gamma = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.reward_exponent = 0.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.online_batch = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.targets.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Trainer, UnconditionalNeedsFixedPreference) {
  Environment env(EnvSpec::hyper_grid(2, 4));
  Rng rng(3);
  FlowModel m(env, small(Conditioning::kUnconditional), rng);
  TrainConfig cfg;
  cfg.targets = two_targets();
  EXPECT_THROW(Trainer(m, env, cfg, oracle_reward(env, cfg), {}, Rng(1)), ContractViolation);
  cfg.fixed_preference = PreferenceVector{0.5, 0.5};
  Trainer t(m, env, cfg, oracle_reward(env, cfg), {}, Rng(1));
  EXPECT_EQ(t.step().source, PreferenceSource::kFixed);
}

TEST(Trainer, FirstStepFillsEveryBuffer) {
  Environment env(EnvSpec::bag_builder(8, 6));
  Rng rng(4);
  FlowModel m(env, small(Conditioning::kHypernet), rng);
  TrainConfig cfg;
  cfg.targets = two_targets();
  Trainer t(m, env, cfg, oracle_reward(env, cfg), {}, Rng(5));
  t.step();
  for (const auto& r : t.replays()) {
    EXPECT_GE(r.size(), 1u);
    EXPECT_LE(r.size(), std::size_t(cfg.online_batch));
    EXPECT_EQ(r.size(), t.replays()[0].size());  // same states everywhere
  }
}

TEST(Trainer, GammaZeroNeverReadsReplays) {
  Environment env(EnvSpec::hyper_grid(2, 4));
  Rng rng(6);
  FlowModel m(env, small(Conditioning::kHypernet), rng);
  TrainConfig cfg;
  cfg.targets = two_targets();
  cfg.hindsight_gamma = 0.0;
  Trainer t(m, env, cfg, oracle_reward(env, cfg), {State{{1, 1}, true}}, Rng(7));
  for (int i = 0; i < 30; ++i) EXPECT_EQ(t.step().source, PreferenceSource::kDirichlet);
  EXPECT_GT(t.replays()[0].size(), 0u);
  EXPECT_EQ(t.fallbacks(), 0u);
}

TEST(Trainer, HindsightFallsBackOnlyWhenBufferEmpty) {
  Environment env(EnvSpec::hyper_grid(2, 4));
  Rng rng(8);
  FlowModel m(env, small(Conditioning::kHypernet), rng);
  TrainConfig cfg;
  cfg.targets = two_targets();
  cfg.hindsight_gamma = 1.0;
  Trainer t(m, env, cfg, oracle_reward(env, cfg), {}, Rng(9));
  // Buffers are filled before the offline half is drawn, so no fallback.
  for (int i = 0; i < 10; ++i) EXPECT_FALSE(t.step().offline_fallback);
}

TEST(Trainer, IsBitReproducible) {
  Environment env(EnvSpec::bag_builder(4, 4));
  TrainConfig cfg;
  cfg.targets = two_targets();
  auto run = [&] {
    Rng init(10);
    FlowModel m(env, small(Conditioning::kHypernet), init);
    Trainer t(m, env, cfg, oracle_reward(env, cfg), {State{{1, 0, 0, 2}, true}}, Rng(11));
    for (int i = 0; i < 25; ++i) t.step();
    return m.params();
  };
  const nn::Vector a = run();
  const nn::Vector b = run();
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())), 0);
}

TEST(Trainer, OnlyTouchesLossParameters) {
  Environment env(EnvSpec::hyper_grid(2, 4));
  Rng rng(12);
  FlowModel m(env, small(Conditioning::kHypernet), rng);
  const nn::Vector before = m.params();
  TrainConfig cfg;
  cfg.targets = two_targets();
  Trainer t(m, env, cfg, oracle_reward(env, cfg), {}, Rng(13));
  for (int i = 0; i < 5; ++i) t.step();
  const nn::Index n = m.loss_param_count();
  EXPECT_EQ(m.params().tail(m.param_count() - n), before.tail(m.param_count() - n));
  EXPECT_NE(m.params().head(n), before.head(n));
}

TEST(Trainer, LossDecreases) {
  Environment env(EnvSpec::hyper_grid(2, 6));
  Rng rng(14);
  FlowModel m(env, small(Conditioning::kHypernet), rng);
  TrainConfig cfg;
  cfg.targets = two_targets();
  cfg.learning_rate = 2e-3;
  Trainer t(m, env, cfg, oracle_reward(env, cfg), {}, Rng(15));
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 600; ++i) {
    const double l = t.step().loss;
    if (i < 50) first += l;
    if (i >= 550) last += l;
  }
  EXPECT_LT(last, 0.5 * first);
}

TEST(Candidates, QuotasAndDistinctness) {
  Environment env(EnvSpec::bag_builder(8, 6));
  Rng rng(16);
  FlowModel m(env, small(Conditioning::kHypernet), rng);
  auto c = sample_candidates(m, env, two_targets(), 4, rng, {});
  ASSERT_EQ(c.objects.size(), 4u);
  EXPECT_EQ(std::count(c.target_of.begin(), c.target_of.end(), 0u), 2);
  EXPECT_EQ(std::set<State>(c.objects.begin(), c.objects.end()).size(), 4u);

  std::vector<PreferenceVector> five;
  for (int i = 0; i < 5; ++i) {
    const double w = i / 4.0;
    five.push_back(PreferenceVector{w, 1.0 - w});
  }
  std::unordered_set<State, StateHash> exclude;
  for (const auto& x : env.enumerate_terminals()) {
    if (x.counts[0] == 0) exclude.insert(x);
  }
  auto big = sample_candidates(m, env, five, 100, rng, exclude);
  ASSERT_EQ(big.objects.size(), 100u);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(std::count(big.target_of.begin(), big.target_of.end(), j), 20);
  }
  EXPECT_EQ(std::set<State>(big.objects.begin(), big.objects.end()).size(), 100u);
  for (const auto& x : big.objects) EXPECT_FALSE(exclude.count(x));

  auto uneven = sample_candidates(m, env, std::vector<PreferenceVector>(3, five[1]), 10, rng, {});
  EXPECT_EQ(std::count(uneven.target_of.begin(), uneven.target_of.end(), 2u), 4);
}

TEST(Candidates, ExploratoryFallbackAndExhaustion) {
  Environment env(EnvSpec::hyper_grid(2, 4));
  Rng rng(17);
  FlowModel m(env, small(Conditioning::kUnconditional), rng);
  // Make the exploitation policy deterministic: always Stop.
  const nn::Index t = m.trunk_param_count();
  const auto& e = m.edge_head_layout();
  m.params().segment(t + e.weight_offset(1), e.fan_in(1) * e.fan_out(1)).setZero();
  m.params().segment(t + e.bias_offset(1), e.fan_out(1)) << 60.0, -60.0, -60.0;
  auto c = sample_candidates(m, env, {PreferenceVector{0.5, 0.5}}, 3, rng, {});
  EXPECT_EQ(c.objects.size(), 3u);
  EXPECT_GT(c.exploratory_rollouts, 0u);

  Environment tiny(EnvSpec::hyper_grid(1, 2));
  FlowModel mt(tiny, small(Conditioning::kUnconditional), rng);
  EXPECT_THROW(sample_candidates(mt, tiny, {PreferenceVector{0.5, 0.5}}, 3, rng, {}), SizeError);
  EXPECT_TRUE(sample_candidates(mt, tiny, {PreferenceVector{0.5, 0.5}}, 0, rng, {}).objects.empty());
}

}  // namespace
}  // namespace hngfn
