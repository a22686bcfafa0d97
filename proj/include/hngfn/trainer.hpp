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

#ifndef HNGFN_TRAINER_HPP_
#define HNGFN_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hngfn/env.hpp"
#include "hngfn/error.hpp"
#include "hngfn/gflownet.hpp"
#include "hngfn/nn.hpp"
#include "hngfn/pareto.hpp"
#include "hngfn/random.hpp"

namespace hngfn {

struct TrainConfig {
  int steps = 5000;
  int online_batch = 8;
  int offline_batch = 8;
  double hindsight_gamma = 0.2;
  double uniform_epsilon = 0.05;
  double learning_rate = 5e-4;
  double reward_exponent = 8.0;
  double reward_norm = 1.0;
  double min_reward = 1e-4;
  double grad_clip = 10.0;
  std::size_t replay_capacity = 1000;
  Eigen::VectorXd alpha = Eigen::VectorXd::Ones(2);
  // Target preferences, one replay buffer each.
  std::vector<PreferenceVector> targets;
  // When set every step trains on this preference alone (a
  // preference-specific model); the Dirichlet and the targets are unused.
  std::optional<PreferenceVector> fixed_preference;

  void validate() const {
    if (!(hindsight_gamma >= 0.0 && hindsight_gamma <= 1.0)) {
      throw ConfigError("hindsight gamma must lie in [0, 1]");
    }
    if (!(reward_exponent >= 1.0)) throw ConfigError("reward exponent must be >= 1");
    if (!(reward_norm > 0.0)) throw ConfigError("reward norm must be positive");
    if (!(min_reward > 0.0)) throw ConfigError("min reward must be positive");
    if (steps < 0 || online_batch < 1 || offline_batch < 0 || replay_capacity < 1) {
      throw ConfigError("training counts must be positive");
    }
    if (!(uniform_epsilon >= 0.0 && uniform_epsilon <= 1.0)) {
      throw ConfigError("uniform epsilon must lie in [0, 1]");
    }
    if (hindsight_gamma > 0.0 && targets.empty() && !fixed_preference) {
      throw ConfigError("hindsight gamma > 0 needs target preferences");
    }
  }
};

/// max(min_reward, (clamp(acq, 0, norm) / norm)^exponent)
inline double shape_reward(double acquisition, const TrainConfig& cfg) {
  if (!std::isfinite(acquisition)) {
    throw NumericError("shape_reward: acquisition value is not finite");
  }
  const double clamped = std::clamp(acquisition, 0.0, cfg.reward_norm);
  return std::max(cfg.min_reward,
                  std::pow(clamped / cfg.reward_norm, cfg.reward_exponent));
}

/// Highest-reward distinct terminal states seen for one target preference,
/// sorted by descending reward (ties: first inserted first).
class ReplayBuffer {
 public:
  struct Entry {
    State state;
    double reward;
    std::uint64_t seq;
  };

  explicit ReplayBuffer(PreferenceVector target, std::size_t capacity = 1000)
      : target_(std::move(target)), capacity_(capacity) {}

  const PreferenceVector& target() const { return target_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  void insert(const State& x, double reward) {
    if (!(reward > 0.0) || !std::isfinite(reward)) {
      throw ContractViolation("replay rewards must be positive and finite");
    }
    auto [seen, fresh] = first_seen_.try_emplace(x, next_seq_);
    if (fresh) ++next_seq_;
    const std::uint64_t seq = seen->second;
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const Entry& e) { return e.state == x; });
    if (it != entries_.end()) {
      if (reward <= it->reward) return;
      entries_.erase(it);
    }
    Entry e{x, reward, seq};
    auto pos = std::lower_bound(entries_.begin(), entries_.end(), e, ranks_before);
    entries_.insert(pos, std::move(e));
    if (entries_.size() > capacity_) entries_.pop_back();
  }

  /// Mean reward of the best `k` entries (all entries if fewer).
  double mean_top(std::size_t k) const {
    const std::size_t n = std::min(k, entries_.size());
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += entries_[i].reward;
    return s / static_cast<double>(n);
  }

 private:
  static bool ranks_before(const Entry& a, const Entry& b) {
    if (a.reward != b.reward) return a.reward > b.reward;
    return a.seq < b.seq;
  }

  PreferenceVector target_;
  std::size_t capacity_;
  std::vector<Entry> entries_;
  std::unordered_map<State, std::uint64_t, StateHash> first_seen_;
  std::uint64_t next_seq_ = 0;
};

enum class PreferenceSource { kDirichlet, kHindsight, kFixed };

inline const char* to_string(PreferenceSource s) {
  switch (s) {
    case PreferenceSource::kDirichlet: return "dirichlet";
    case PreferenceSource::kHindsight: return "hindsight";
    case PreferenceSource::kFixed: return "fixed";
  }
  return "?";
}

struct PreferenceDraw {
  PreferenceVector lambda;
  PreferenceSource source = PreferenceSource::kDirichlet;
  std::size_t target = 0;  // index into cfg.targets for hindsight draws
};

/// Mixture (1 - gamma) Dir(alpha) + gamma Uniform(targets).
inline PreferenceDraw sample_preference(const TrainConfig& cfg, Rng& rng) {
  if (cfg.fixed_preference) {
    return {*cfg.fixed_preference, PreferenceSource::kFixed, 0};
  }
  if (cfg.hindsight_gamma > 0.0 && uniform01(rng) < cfg.hindsight_gamma) {
    if (cfg.targets.empty()) {
      throw ContractViolation("hindsight draw needs target preferences");
    }
    const std::size_t k = uniform_index(rng, cfg.targets.size());
    return {cfg.targets[k], PreferenceSource::kHindsight, k};
  }
  return {sample_dirichlet(cfg.alpha, rng), PreferenceSource::kDirichlet, 0};
}

/// Shaped reward R_lambda(x) of a terminal state; must be positive.
using RewardFn = std::function<double(const PreferenceVector&, const State&)>;

struct StepStats {
  int step = 0;
  double loss = 0.0;
  PreferenceVector lambda;
  PreferenceSource source = PreferenceSource::kDirichlet;
  double mean_reward = 0.0;
  bool offline_fallback = false;
};

/// Flow-matching training with the hindsight-style off-policy mixture.
///
/// Each step draws a preference from the mixture. Half of the minibatch is
/// on-policy rollouts (with uniform exploration); the other half replays the
/// drawn target's buffer (hindsight draws) or backward trajectories of
/// dataset objects (Dirichlet draws). Every new on-policy terminal is stored
/// in every target's buffer under that target's reward.
class Trainer {
 public:
  Trainer(FlowModel& model, const Environment& env, TrainConfig cfg,
          RewardFn reward, std::vector<State> dataset, Rng rng)
      : model_(model),
        env_(env),
        cfg_(std::move(cfg)),
        reward_(std::move(reward)),
        dataset_(std::move(dataset)),
        rng_(std::move(rng)),
        adam_(model.loss_param_count(), cfg_.learning_rate) {
    cfg_.validate();
    if (model_.conditioning() == Conditioning::kUnconditional &&
        !cfg_.fixed_preference) {
      throw ContractViolation(
          "an unconditional model can only be trained on a fixed preference");
    }
    for (const auto& t : cfg_.targets) replays_.emplace_back(t, cfg_.replay_capacity);
  }

  const TrainConfig& config() const { return cfg_; }
  const std::vector<ReplayBuffer>& replays() const { return replays_; }
  const nn::AdamState& optimizer() const { return adam_; }
  int steps_done() const { return steps_done_; }
  std::size_t fallbacks() const { return fallbacks_; }

  /// Mean over targets of the mean top-k replay reward.
  double average_top_reward(std::size_t k) const {
    if (replays_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : replays_) s += r.mean_top(k);
    return s / static_cast<double>(replays_.size());
  }

  StepStats step() {
    PreferenceDraw draw = sample_preference(cfg_, rng_);
    StepStats stats;
    stats.step = steps_done_;
    stats.lambda = draw.lambda;
    stats.source = draw.source;

    std::vector<Trajectory> batch = sample_trajectories(
        model_, env_, draw.lambda, cfg_.uniform_epsilon,
        static_cast<std::size_t>(cfg_.online_batch), rng_);
    for (const auto& t : batch) {
      const State x = t.terminal_state();
      for (auto& r : replays_) r.insert(x, reward_(r.target(), x));
    }

    bool from_replay = draw.source == PreferenceSource::kHindsight &&
                       !replays_[draw.target].empty();
    if (draw.source == PreferenceSource::kHindsight && !from_replay) {
      stats.offline_fallback = true;
      ++fallbacks_;
    }
    for (int i = 0; i < cfg_.offline_batch; ++i) {
      if (from_replay) {
        const auto& entries = replays_[draw.target].entries();
        const State& x = entries[uniform_index(rng_, entries.size())].state;
        batch.push_back(env_.backward_trajectory(x, rng_));
      } else if (!dataset_.empty()) {
        const State& x = dataset_[uniform_index(rng_, dataset_.size())];
        batch.push_back(env_.backward_trajectory(x, rng_));
      }
    }

    std::vector<State> states = trajectory_states(batch);
    std::vector<double> rewards(states.size(), 0.0);
    double reward_sum = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i].terminal) {
        rewards[i] = reward_(draw.lambda, states[i]);
        reward_sum += rewards[i];
      }
    }
    stats.mean_reward = reward_sum / static_cast<double>(batch.size());

    FmResult fm = fm_loss(model_, env_, draw.lambda, states, rewards, true);
    const nn::Index n = model_.loss_param_count();
    nn::clip_grad_norm(fm.grad.head(n), cfg_.grad_clip);
    nn::adam_step(adam_, model_.params().head(n), fm.grad.head(n));
    stats.loss = fm.loss;
    ++steps_done_;
    return stats;
  }

 private:
  FlowModel& model_;
  const Environment& env_;
  TrainConfig cfg_;
  RewardFn reward_;
  std::vector<State> dataset_;
  Rng rng_;
  nn::AdamState adam_;
  std::vector<ReplayBuffer> replays_;
  int steps_done_ = 0;
  std::size_t fallbacks_ = 0;
};

struct CandidateBatch {
  std::vector<State> objects;
  std::vector<std::size_t> target_of;  // index of the preference used
  std::size_t rollouts = 0;
  std::size_t exploratory_rollouts = 0;
};

/// Draws b novel terminal states, b / k per target preference (the last
/// target takes the remainder), with the exploitation policy (no uniform
/// exploration). After 50 * quota attempts for a target without filling the
/// quota, uniform rollouts are used for another 50 * quota attempts; if the
/// quota still cannot be met the environment is considered exhausted.
inline CandidateBatch sample_candidates(
    const FlowModel& model, const Environment& env,
    const std::vector<PreferenceVector>& targets, std::size_t b, Rng& rng,
    const std::unordered_set<State, StateHash>& exclude) {
  if (targets.empty()) throw ContractViolation("sample_candidates needs targets");
  if (b == 0) return {};
  CandidateBatch out;
  std::unordered_set<State, StateHash> taken;
  const std::size_t k = targets.size();
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t quota = j + 1 < k ? b / k : b - (k - 1) * (b / k);
    const std::size_t cap = 50 * std::max<std::size_t>(quota, 1);
    std::size_t got = 0;
    for (int phase = 0; phase < 2 && got < quota; ++phase) {
      const double eps = phase == 0 ? 0.0 : 1.0;
      std::size_t attempts = 0;
      while (got < quota && attempts < cap) {
        const std::size_t n = std::min(quota - got, cap - attempts);
        auto ts = sample_trajectories(model, env, targets[j], eps, n, rng);
        attempts += n;
        out.rollouts += n;
        if (phase == 1) out.exploratory_rollouts += n;
        for (const auto& t : ts) {
          State x = t.terminal_state();
          if (got < quota && !exclude.count(x) && taken.insert(x).second) {
            out.objects.push_back(std::move(x));
            out.target_of.push_back(j);
            ++got;
          }
        }
      }
    }
    if (got < quota) {
      throw SizeError("could not find " + std::to_string(quota) +
                      " novel objects for target " + std::to_string(j) +
                      " in " + env.spec().describe() +
                      " (degenerate or exhausted environment)");
    }
  }
  return out;
}

}  // namespace hngfn

#endif  // HNGFN_TRAINER_HPP_
