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

#ifndef HNGFN_SYNTHETIC_HPP_
#define HNGFN_SYNTHETIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hngfn/env.hpp"
#include "hngfn/error.hpp"
#include "hngfn/exact.hpp"
#include "hngfn/gflownet.hpp"
#include "hngfn/mobo.hpp"
#include "hngfn/objectives.hpp"
#include "hngfn/pareto.hpp"
#include "hngfn/random.hpp"
#include "hngfn/trainer.hpp"

namespace hngfn {

// "hypernet" and "concat" train one preference-conditioned model on
// Dirichlet draws; "ps" trains one unconditional model per evaluation
// preference, splitting the step budget evenly.
enum class Variant { kHypernet, kConcat, kPreferenceSpecific };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kHypernet: return "hypernet";
    case Variant::kConcat: return "concat";
    case Variant::kPreferenceSpecific: return "ps";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "hypernet") return Variant::kHypernet;
  if (s == "concat") return Variant::kConcat;
  if (s == "ps") return Variant::kPreferenceSpecific;
  if (s == "unconditional") {
    throw ConfigError(
        "an unconditional model cannot be evaluated at several preferences; "
        "use \"ps\" for one unconditional model per preference");
  }
  throw ConfigError("unknown variant \"" + s + "\"");
}

struct SyntheticConfig {
  int steps = 5000;  // per variant; ps splits it over the preferences
  std::size_t samples = 1000;
  std::size_t top_k = 100;
  Scalarization scalarization = Scalarization::kWeightedSum;
  std::size_t cor_test_size = 5000;
  TrainConfig train;
  FlowModelConfig model;
};

/// Evenly spaced preferences on the two-objective simplex, endpoints
/// included, ordered from (1, 0) to (0, 1).
inline std::vector<PreferenceVector> evaluation_grid(int num_objectives, int points = 5) {
  if (num_objectives != 2) {
    throw ConfigError("the synthetic evaluation grid is defined for two objectives");
  }
  if (points < 2) throw ConfigError("the evaluation grid needs at least two points");
  std::vector<PreferenceVector> out;
  for (int i = 0; i < points; ++i) {
    const double w = 1.0 - double(i) / double(points - 1);
    out.push_back(PreferenceVector{w, 1.0 - w});
  }
  return out;
}

struct PreferenceResult {
  PreferenceVector lambda;
  double l1 = 0.0;  // exact policy vs exact target distribution
  double correlation = std::numeric_limits<double>::quiet_NaN();
  double diversity = std::numeric_limits<double>::quiet_NaN();  // top-k
  ObjectiveVector top_mean;                                     // top-k
  std::vector<State> samples;
  std::vector<ObjectiveVector> sample_values;
};

struct VariantResult {
  Variant variant = Variant::kHypernet;
  std::uint64_t seed = 0;
  std::vector<PreferenceResult> preferences;
  double hypervolume = 0.0;  // of every sample over every preference
  double diversity = 0.0;
  double correlation = 0.0;
  double l1 = 0.0;
};

/// Shaped scalarized true objectives.
inline std::function<double(const PreferenceVector&, const State&)> synthetic_reward(
    const Environment& env, const SyntheticOracle& oracle, const SyntheticConfig& cfg) {
  return [&env, &oracle, train = cfg.train, kind = cfg.scalarization](
             const PreferenceVector& lambda, const State& x) {
    return shape_reward(scalarize(kind, lambda, oracle.evaluate(env, x)), train);
  };
}

using StepHook = std::function<void(std::size_t model_index, const StepStats&)>;

/// Trains `variant`, then evaluates it at every grid preference.
inline VariantResult run_synthetic_variant(const SyntheticConfig& cfg, const Environment& env,
                                           const SyntheticOracle& oracle, Variant variant,
                                           std::uint64_t seed, const StepHook& on_step = {}) {
  const int m = oracle.num_objectives();
  const auto grid = evaluation_grid(m);
  const auto reward = synthetic_reward(env, oracle, cfg);
  const std::string name = to_string(variant);
  if (cfg.model.num_objectives != m) {
    throw ConfigError("model objective count does not match the oracle");
  }
  if (cfg.train.hindsight_gamma != 0.0) {
    throw ConfigError("the synthetic scenario has no target preferences; set gamma to 0");
  }

  std::vector<FlowModel> models;
  auto train = [&](FlowModel& model, TrainConfig tc, int steps, std::size_t index) {
    Trainer trainer(model, env, std::move(tc), reward, {},
                    make_rng(seed, "gfn/" + name, index));
    for (int s = 0; s < steps; ++s) {
      const StepStats stats = trainer.step();
      if (on_step) on_step(index, stats);
    }
  };
  if (variant == Variant::kPreferenceSpecific) {
    const int each = cfg.steps / int(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      FlowModelConfig mc = cfg.model;
      mc.conditioning = Conditioning::kUnconditional;
      Rng init = make_rng(seed, "gfn-init/" + name, j);
      models.emplace_back(env, mc, init);
      TrainConfig tc = cfg.train;
      tc.fixed_preference = grid[j];
      train(models.back(), tc, each, j);
    }
  } else {
    FlowModelConfig mc = cfg.model;
    mc.conditioning =
        variant == Variant::kHypernet ? Conditioning::kHypernet : Conditioning::kConcat;
    Rng init = make_rng(seed, "gfn-init/" + name);
    models.emplace_back(env, mc, init);
    TrainConfig tc = cfg.train;
    tc.alpha = Eigen::VectorXd::Ones(m);
    tc.fixed_preference.reset();
    train(models.back(), tc, cfg.steps, 0);
  }

  Rng mc_rng = make_rng(seed, "mc");
  const std::vector<State> test = stratified_test_set(oracle, env, cfg.cor_test_size, mc_rng);

  VariantResult out;
  out.variant = variant;
  out.seed = seed;
  std::vector<ObjectiveVector> all;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const FlowModel& model = models[variant == Variant::kPreferenceSpecific ? j : 0];
    const PreferenceVector& lambda = grid[j];
    PreferenceResult r;
    r.lambda = lambda;
    Rng eval_rng = make_rng(seed, "eval/" + name, j);
    for (const auto& t : sample_trajectories(model, env, lambda, 0.0, cfg.samples, eval_rng)) {
      r.samples.push_back(t.terminal_state());
      r.sample_values.push_back(oracle.evaluate(env, r.samples.back()));
      all.push_back(r.sample_values.back());
    }
    // Top-k by scalarized objective; ties keep sampling order.
    std::vector<std::size_t> order(r.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scalarize(cfg.scalarization, lambda, r.sample_values[a]) >
             scalarize(cfg.scalarization, lambda, r.sample_values[b]);
    });
    order.resize(std::min(cfg.top_k, order.size()));
    std::vector<State> top;
    r.top_mean = ObjectiveVector::Zero(m);
    for (std::size_t i : order) {
      top.push_back(r.samples[i]);
      r.top_mean += r.sample_values[i];
    }
    if (!order.empty()) r.top_mean /= double(order.size());
    r.diversity = batch_diversity(top);

    const ExactDistribution policy = exact_policy_distribution(model, lambda, env);
    const ExactDistribution target = exact_target_distribution(
        [&](const State& x) { return reward(lambda, x); }, env);
    r.l1 = l1_distance(policy, target);
    const auto probs = policy.as_map();
    std::vector<double> logp, logr;
    for (const auto& x : test) {
      logp.push_back(std::log(probs.at(x)));
      logr.push_back(std::log(reward(lambda, x)));
    }
    try {
      r.correlation = spearman(logp, logr);
    } catch (const UndefinedMetric&) {
    }
    out.preferences.push_back(std::move(r));
  }
  out.hypervolume = hypervolume(pareto_front(all));
  double div = 0.0, cor = 0.0, l1 = 0.0;
  for (const auto& r : out.preferences) {
    div += r.diversity;
    cor += r.correlation;
    l1 += r.l1;
  }
  const double n = double(out.preferences.size());
  out.diversity = div / n;
  out.correlation = cor / n;
  out.l1 = l1 / n;
  return out;
}

}  // namespace hngfn

#endif  // HNGFN_SYNTHETIC_HPP_
