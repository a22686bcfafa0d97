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

#ifndef HNGFN_MOBO_HPP_
#define HNGFN_MOBO_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hngfn/checkpoint.hpp"
#include "hngfn/env.hpp"
#include "hngfn/error.hpp"
#include "hngfn/exact.hpp"
#include "hngfn/gflownet.hpp"
#include "hngfn/objectives.hpp"
#include "hngfn/pareto.hpp"
#include "hngfn/random.hpp"
#include "hngfn/surrogate.hpp"
#include "hngfn/trainer.hpp"

namespace hngfn {

struct MoboConfig {
  int rounds = 8;
  std::size_t batch = 100;
  std::size_t initial = 200;
  // Target preferences per round; 0 picks 5 for two objectives, else 10.
  std::size_t k = 0;
  Eigen::VectorXd alpha;  // empty: all ones
  Scalarization scalarization = Scalarization::kWeightedSum;
  double beta_ucb = 0.1;
  int mc_samples = 64;
  TrainConfig train;
  FlowModelConfig model;
  SurrogateConfig surrogate;
  // Fresh heads (or hypernetwork) every round; the trunk is always kept.
  bool reinit_heads = true;
  std::size_t cor_test_size = 5000;  // 0 disables the Cor metric
  std::size_t top_k = 20;            // for the logged average top-k reward
  std::uint64_t seed = 0;

  std::size_t resolved_k(int num_objectives) const {
    if (k != 0) return k;
    return num_objectives == 2 ? 5 : 10;
  }

  Eigen::VectorXd resolved_alpha(int num_objectives) const {
    if (alpha.size() == 0) return Eigen::VectorXd::Ones(num_objectives);
    return alpha;
  }

  void validate(int num_objectives) const {
    if (rounds < 0) throw ConfigError("rounds must be >= 0");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (initial < 1) throw ConfigError("initial dataset size must be >= 1");
    const std::size_t kk = resolved_k(num_objectives);
    if (kk < 1 || kk > batch) throw ConfigError("k must lie in [1, batch]");
    if (resolved_alpha(num_objectives).size() != num_objectives) {
      throw ConfigError("alpha must have one entry per objective");
    }
    if ((resolved_alpha(num_objectives).array() <= 0.0).any()) {
      throw ConfigError("alpha entries must be positive");
    }
    if (model.num_objectives != num_objectives) {
      throw ConfigError("model objective count does not match the oracle");
    }
    if (train.fixed_preference) {
      throw ConfigError("MOBO trains on preference draws, not a fixed preference");
    }
    if (model.conditioning == Conditioning::kUnconditional) {
      throw ConfigError("MOBO needs a preference-conditioned model");
    }
    if (beta_ucb < 0.0) throw ConfigError("beta_ucb must be non-negative");
    surrogate.validate();
  }
};

/// Evaluated objects, in insertion order, without duplicates.
class Dataset {
 public:
  void add(State x, ObjectiveVector f) {
    if (!x.terminal) throw ContractViolation("datasets hold terminal states only");
    if (!index_.insert(x).second) {
      throw ContractViolation("duplicate object " + Environment::encode(x));
    }
    objects_.push_back(std::move(x));
    values_.push_back(std::move(f));
  }

  std::size_t size() const { return objects_.size(); }
  bool contains(const State& x) const { return index_.count(x) > 0; }
  const std::vector<State>& objects() const { return objects_; }
  const std::vector<ObjectiveVector>& values() const { return values_; }
  const std::unordered_set<State, StateHash>& index() const { return index_; }

  nn::Matrix features(const Environment& env) const {
    return featurize_batch(env, objects_);
  }

  nn::Matrix targets() const {
    nn::Matrix y(values_.empty() ? 0 : values_.front().size(),
                 static_cast<nn::Index>(values_.size()));
    for (std::size_t i = 0; i < values_.size(); ++i) y.col(nn::Index(i)) = values_[i];
    return y;
  }

  double hypervolume() const {
    if (values_.empty()) return 0.0;
    return hngfn::hypervolume(pareto_front(values_));
  }

 private:
  std::vector<State> objects_;
  std::vector<ObjectiveVector> values_;
  std::unordered_set<State, StateHash> index_;
};

/// n distinct objects from uniform rollouts, each evaluated by the oracle.
inline Dataset init_dataset(const SyntheticOracle& oracle, const Environment& env,
                            std::size_t n, Rng& rng) {
  if (n < 1) throw ContractViolation("initial dataset needs n >= 1");
  if (double(n) > env.nonterminal_count()) {
    throw SizeError(env.spec().describe() + " has fewer than " + std::to_string(n) +
                    " distinct objects");
  }
  Dataset d;
  const std::size_t cap = 1000 * n;
  for (std::size_t attempts = 0; d.size() < n; ++attempts) {
    if (attempts == cap) {
      throw SizeError("uniform rollouts found only " + std::to_string(d.size()) +
                      " of " + std::to_string(n) + " distinct objects");
    }
    State x = uniform_rollout(env, rng).terminal_state();
    if (!d.contains(x)) {
      ObjectiveVector f = oracle.evaluate(env, x);
      d.add(std::move(x), std::move(f));
    }
  }
  return d;
}

inline std::vector<PreferenceVector> build_target_preferences(
    const Eigen::VectorXd& alpha, std::size_t k, Rng& rng) {
  if (k < 1) throw ContractViolation("need at least one target preference");
  std::vector<PreferenceVector> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) out.push_back(sample_dirichlet(alpha, rng));
  return out;
}

/// Distinct uniform-rollout objects whose mean objective value is spread
/// roughly evenly over ten bins of [0, 1] (rejection per bin). If the
/// environment has at most `size` terminals, all of them are used.
inline std::vector<State> stratified_test_set(const SyntheticOracle& oracle,
                                              const Environment& env,
                                              std::size_t size, Rng& rng) {
  if (double(size) >= env.nonterminal_count()) return env.enumerate_terminals();
  constexpr int kBins = 10;
  const std::size_t quota = (size + kBins - 1) / kBins;
  std::vector<std::size_t> filled(kBins, 0);
  std::unordered_set<State, StateHash> seen;
  std::vector<State> out;
  std::vector<State> rejected;
  const std::size_t cap = 200 * size;
  for (std::size_t a = 0; a < cap && out.size() < size; ++a) {
    State x = uniform_rollout(env, rng).terminal_state();
    if (!seen.insert(x).second) continue;
    const double mean = oracle.evaluate(env, x).mean();
    const int bin = std::min(kBins - 1, static_cast<int>(mean * kBins));
    if (filled[std::size_t(bin)] < quota) {
      ++filled[std::size_t(bin)];
      out.push_back(std::move(x));
    } else {
      rejected.push_back(std::move(x));
    }
  }
  // Bins that rollouts rarely reach stay short; top up in draw order.
  for (std::size_t i = 0; out.size() < size && i < rejected.size(); ++i) {
    out.push_back(std::move(rejected[i]));
  }
  return out;
}

/// Mean over `targets` of Spearman(log p(x | lambda), scalarized f(x)) on the
/// test set, with p from the exact forward DP. NaN when undefined.
inline double correlation_metric(const FlowModel& model, const Environment& env,
                                 const std::vector<PreferenceVector>& targets,
                                 Scalarization kind, const std::vector<State>& test,
                                 const std::vector<ObjectiveVector>& test_values) {
  if (test.size() < 3 || targets.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& lambda : targets) {
    const auto probs = exact_policy_distribution(model, lambda, env).as_map();
    std::vector<double> logp, score;
    logp.reserve(test.size());
    score.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      logp.push_back(std::log(probs.at(test[i])));
      score.push_back(scalarize(kind, lambda, test_values[i]));
    }
    try {
      sum += spearman(logp, score);
    } catch (const UndefinedMetric&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
  return sum / double(targets.size());
}

/// Everything one round trains against: the fitted surrogate, the target
/// preferences and the acquisition. Posteriors are cached per object.
class RoundContext {
 public:
  RoundContext(const MoboConfig& cfg, const Environment& env, const Dataset& data,
               int num_objectives, int round)
      : env_(env),
        cfg_(cfg),
        surrogate_(env.feature_size(), num_objectives, cfg.surrogate) {
    Rng surrogate_rng = make_rng(cfg.seed, "surrogate", std::uint64_t(round));
    fit_ = surrogate_.fit(data.features(env), data.targets(), surrogate_rng);
    Rng pref_rng = make_rng(cfg.seed, "preferences", std::uint64_t(round));
    targets_ = build_target_preferences(cfg.resolved_alpha(num_objectives),
                                        cfg.resolved_k(num_objectives), pref_rng);
    Rng acq_rng = make_rng(cfg.seed, "acquisition", std::uint64_t(round));
    acquisition_ = std::make_unique<UcbAcquisition>(
        AcquisitionConfig{cfg.scalarization, cfg.beta_ucb, cfg.mc_samples},
        num_objectives, acq_rng);
  }

  const std::vector<PreferenceVector>& targets() const { return targets_; }
  const FitReport& fit_report() const { return fit_; }
  const Surrogate& surrogate() const { return surrogate_; }
  const UcbAcquisition& acquisition() const { return *acquisition_; }

  double acquisition_value(const PreferenceVector& lambda, const State& x) {
    auto it = cache_.find(x);
    if (it == cache_.end()) {
      const Posterior p = surrogate_.posterior(env_.featurize(x));
      it = cache_.emplace(x, std::make_pair(nn::Vector(p.mean.col(0)),
                                            nn::Vector(p.std.col(0)))).first;
    }
    return (*acquisition_)(lambda, it->second.first, it->second.second);
  }

  /// R_lambda(x) = shape_reward(UCB); the context must outlive the result.
  RewardFn reward(const TrainConfig& train) {
    return [this, train](const PreferenceVector& lambda, const State& x) {
      return shape_reward(acquisition_value(lambda, x), train);
    };
  }

  /// The round's training configuration: the shared settings plus this
  /// round's targets and the Dirichlet concentration.
  TrainConfig train_config(int num_objectives) const {
    TrainConfig t = cfg_.train;
    t.targets = targets_;
    t.alpha = cfg_.resolved_alpha(num_objectives);
    return t;
  }

 private:
  const Environment& env_;
  const MoboConfig& cfg_;
  Surrogate surrogate_;
  FitReport fit_;
  std::vector<PreferenceVector> targets_;
  std::unique_ptr<UcbAcquisition> acquisition_;
  std::unordered_map<State, std::pair<nn::Vector, nn::Vector>, StateHash> cache_;
};

struct RoundReport {
  int round = 0;  // 0 describes the initial dataset
  std::vector<State> batch;
  std::vector<ObjectiveVector> batch_values;
  std::vector<PreferenceVector> targets;
  double hypervolume = 0.0;  // of the cumulative dataset
  double diversity = std::numeric_limits<double>::quiet_NaN();  // within batch
  double correlation = std::numeric_limits<double>::quiet_NaN();
  std::size_t dataset_size = 0;
  double surrogate_validation_loss = std::numeric_limits<double>::quiet_NaN();
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double average_top_reward = std::numeric_limits<double>::quiet_NaN();
  std::size_t exploratory_rollouts = 0;
  double seconds = 0.0;  // wall clock; excluded from deterministic outputs
};

inline double batch_diversity(const std::vector<State>& batch) {
  if (batch.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<int>> counts;
  counts.reserve(batch.size());
  for (const auto& x : batch) counts.push_back(x.counts);
  return diversity(counts);
}

/// Resumable state after a completed round.
struct MoboState {
  int completed_round = 0;
  Dataset dataset;
  nn::Vector model_params;
  std::vector<RoundReport> reports;
};

inline nlohmann::json report_to_json(const RoundReport& r) {
  nlohmann::json batch = nlohmann::json::array();
  for (std::size_t i = 0; i < r.batch.size(); ++i) {
    batch.push_back({{"object", Environment::encode(r.batch[i])},
                     {"f", std::vector<double>(r.batch_values[i].data(),
                                               r.batch_values[i].data() +
                                                   r.batch_values[i].size())}});
  }
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : r.targets) {
    targets.push_back(std::vector<double>(t.weights().data(),
                                          t.weights().data() + t.weights().size()));
  }
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  return {{"round", r.round},
          {"hv", r.hypervolume},
          {"div", num(r.diversity)},
          {"cor", num(r.correlation)},
          {"dataset_size", r.dataset_size},
          {"surrogate_validation_loss", num(r.surrogate_validation_loss)},
          {"final_loss", num(r.final_loss)},
          {"average_top_reward", num(r.average_top_reward)},
          {"exploratory_rollouts", r.exploratory_rollouts},
          {"seconds", r.seconds},
          {"targets", targets},
          {"batch", batch}};
}

inline RoundReport report_from_json(const nlohmann::json& j, const Environment& env) {
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  RoundReport r;
  r.round = j.at("round").get<int>();
  r.hypervolume = j.at("hv").get<double>();
  r.diversity = num(j.at("div"));
  r.correlation = num(j.at("cor"));
  r.dataset_size = j.at("dataset_size").get<std::size_t>();
  r.surrogate_validation_loss = num(j.at("surrogate_validation_loss"));
  r.final_loss = num(j.at("final_loss"));
  r.average_top_reward = num(j.at("average_top_reward"));
  r.exploratory_rollouts = j.at("exploratory_rollouts").get<std::size_t>();
  r.seconds = j.at("seconds").get<double>();
  for (const auto& t : j.at("targets")) {
    const auto w = t.get<std::vector<double>>();
    r.targets.emplace_back(Eigen::Map<const Eigen::VectorXd>(w.data(), nn::Index(w.size())));
  }
  for (const auto& b : j.at("batch")) {
    r.batch.push_back(env.decode(b.at("object").get<std::string>()));
    const auto f = b.at("f").get<std::vector<double>>();
    r.batch_values.emplace_back(Eigen::Map<const Eigen::VectorXd>(f.data(), nn::Index(f.size())));
  }
  return r;
}

inline nlohmann::json state_to_json(const MoboState& s) {
  nlohmann::json data = nlohmann::json::array();
  for (std::size_t i = 0; i < s.dataset.size(); ++i) {
    const auto& f = s.dataset.values()[i];
    data.push_back({{"object", Environment::encode(s.dataset.objects()[i])},
                    {"f", std::vector<double>(f.data(), f.data() + f.size())}});
  }
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : s.reports) reports.push_back(report_to_json(r));
  nn::Checkpoint c;
  c.add_vector("model", s.model_params);
  return {{"completed_round", s.completed_round},
          {"dataset", data},
          {"reports", reports},
          {"tensors", c.to_json()}};
}

inline MoboState state_from_json(const nlohmann::json& j, const Environment& env) {
  MoboState s;
  s.completed_round = j.at("completed_round").get<int>();
  for (const auto& d : j.at("dataset")) {
    const auto f = d.at("f").get<std::vector<double>>();
    s.dataset.add(env.decode(d.at("object").get<std::string>()),
                  Eigen::Map<const Eigen::VectorXd>(f.data(), nn::Index(f.size())));
  }
  for (const auto& r : j.at("reports")) s.reports.push_back(report_from_json(r, env));
  s.model_params = nn::Checkpoint::from_json(j.at("tensors")).get_vector("model");
  return s;
}

/// Raised when a round fails after at least one checkpoint was handed to
/// the hooks; the message names the round that failed.
class RoundAborted : public std::runtime_error {
 public:
  RoundAborted(int round, const std::string& what)
      : std::runtime_error("round " + std::to_string(round) + " aborted: " + what),
        round_(round) {}
  int round() const { return round_; }

 private:
  int round_;
};

struct MoboHooks {
  // Every training step of every round.
  std::function<void(int round, const StepStats&, double average_top)> on_step;
  std::function<void(const RoundReport&)> on_round;
  // Called after every completed round (including round 0).
  std::function<void(const MoboState&)> on_checkpoint;
};

struct MoboResult {
  std::vector<RoundReport> reports;
  ParetoFront front;
  Dataset dataset;
};

/// The outer loop. Per round: fit the surrogate on the current dataset,
/// draw k target preferences, train the flow model on the shaped UCB
/// rewards, sample b novel candidates, evaluate them and extend the data.
/// Every random stream is derived from (seed, component, round), so a run
/// resumed from a checkpoint repeats the remaining rounds exactly.
inline MoboResult run_mobo(const MoboConfig& cfg, const Environment& env,
                           const SyntheticOracle& oracle, const MoboHooks& hooks = {},
                           const std::optional<MoboState>& resume = std::nullopt) {
  const int m = oracle.num_objectives();
  cfg.validate(m);
  using Clock = std::chrono::steady_clock;

  Rng model_rng = make_rng(cfg.seed, "gfn-init");
  FlowModel model(env, cfg.model, model_rng);

  std::vector<State> test;
  std::vector<ObjectiveVector> test_values;
  if (cfg.cor_test_size > 0) {
    Rng mc_rng = make_rng(cfg.seed, "mc");
    test = stratified_test_set(oracle, env, cfg.cor_test_size, mc_rng);
    for (const auto& x : test) test_values.push_back(oracle.evaluate(env, x));
  }

  MoboState state;
  if (resume) {
    state = *resume;
    if (state.model_params.size() != model.param_count()) {
      throw DimensionError("checkpoint model does not match the configured model");
    }
    model.params() = state.model_params;
  } else {
    const auto t0 = Clock::now();
    Rng env_rng = make_rng(cfg.seed, "env");
    state.dataset = init_dataset(oracle, env, cfg.initial, env_rng);
    RoundReport r0;
    r0.batch = state.dataset.objects();
    r0.batch_values = state.dataset.values();
    r0.hypervolume = state.dataset.hypervolume();
    r0.diversity = batch_diversity(r0.batch);
    r0.dataset_size = state.dataset.size();
    r0.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    state.reports.push_back(r0);
    state.model_params = model.params();
    if (hooks.on_round) hooks.on_round(r0);
    if (hooks.on_checkpoint) hooks.on_checkpoint(state);
  }

  for (int round = state.completed_round + 1; round <= cfg.rounds; ++round) {
    const auto t0 = Clock::now();
    RoundReport report;
    report.round = round;
    try {
      RoundContext ctx(cfg, env, state.dataset, m, round);
      report.targets = ctx.targets();
      report.surrogate_validation_loss = ctx.fit_report().validation_loss;
      if (cfg.reinit_heads) {
        Rng heads_rng = make_rng(cfg.seed, "gfn-heads", std::uint64_t(round));
        model.reinit_heads(heads_rng);
      }
      TrainConfig train = ctx.train_config(m);
      Trainer trainer(model, env, train, ctx.reward(train), state.dataset.objects(),
                      make_rng(cfg.seed, "gfn", std::uint64_t(round)));
      for (int s = 0; s < train.steps; ++s) {
        const StepStats stats = trainer.step();
        report.final_loss = stats.loss;
        if (hooks.on_step) hooks.on_step(round, stats, trainer.average_top_reward(cfg.top_k));
      }
      report.average_top_reward = trainer.average_top_reward(cfg.top_k);

      Rng cand_rng = make_rng(cfg.seed, "candidates", std::uint64_t(round));
      CandidateBatch cands = sample_candidates(model, env, ctx.targets(), cfg.batch,
                                               cand_rng, state.dataset.index());
      report.exploratory_rollouts = cands.exploratory_rollouts;
      for (auto& x : cands.objects) {
        ObjectiveVector f = oracle.evaluate(env, x);
        report.batch_values.push_back(f);
        state.dataset.add(x, std::move(f));
      }
      report.batch = std::move(cands.objects);
      report.hypervolume = state.dataset.hypervolume();
      report.diversity = batch_diversity(report.batch);
      report.dataset_size = state.dataset.size();
      if (!test.empty()) {
        report.correlation = correlation_metric(model, env, ctx.targets(),
                                                cfg.scalarization, test, test_values);
      }
    } catch (const std::exception& e) {
      throw RoundAborted(round, e.what());
    }
    report.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    state.completed_round = round;
    state.model_params = model.params();
    state.reports.push_back(report);
    if (hooks.on_round) hooks.on_round(report);
    if (hooks.on_checkpoint) hooks.on_checkpoint(state);
  }

  MoboResult out;
  out.reports = std::move(state.reports);
  out.front = pareto_front(state.dataset.values());
  out.dataset = std::move(state.dataset);
  return out;
}

/// Same budget as run_mobo with uniform-rollout candidates: the initial
/// dataset is drawn from the same stream, then each round adds b novel
/// uniformly sampled objects.
inline MoboResult run_random_baseline(const MoboConfig& cfg, const Environment& env,
                                      const SyntheticOracle& oracle) {
  Rng env_rng = make_rng(cfg.seed, "env");
  MoboResult out;
  out.dataset = init_dataset(oracle, env, cfg.initial, env_rng);
  RoundReport r0;
  r0.hypervolume = out.dataset.hypervolume();
  r0.dataset_size = out.dataset.size();
  out.reports.push_back(r0);
  for (int round = 1; round <= cfg.rounds; ++round) {
    Rng rng = make_rng(cfg.seed, "random-baseline", std::uint64_t(round));
    RoundReport r;
    r.round = round;
    const std::size_t cap = 1000 * cfg.batch;
    for (std::size_t a = 0; r.batch.size() < cfg.batch; ++a) {
      if (a == cap) throw SizeError("random baseline exhausted the environment");
      State x = uniform_rollout(env, rng).terminal_state();
      if (out.dataset.contains(x)) continue;
      ObjectiveVector f = oracle.evaluate(env, x);
      out.dataset.add(x, f);
      r.batch.push_back(std::move(x));
      r.batch_values.push_back(std::move(f));
    }
    r.hypervolume = out.dataset.hypervolume();
    r.diversity = batch_diversity(r.batch);
    r.dataset_size = out.dataset.size();
    out.reports.push_back(std::move(r));
  }
  out.front = pareto_front(out.dataset.values());
  return out;
}

}  // namespace hngfn

#endif  // HNGFN_MOBO_HPP_
