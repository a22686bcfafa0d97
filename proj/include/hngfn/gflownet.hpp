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

#ifndef HNGFN_GFLOWNET_HPP_
#define HNGFN_GFLOWNET_HPP_

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hngfn/env.hpp"
#include "hngfn/error.hpp"
#include "hngfn/nn.hpp"
#include "hngfn/pareto.hpp"
#include "hngfn/random.hpp"

namespace hngfn {

enum class Conditioning { kUnconditional, kConcat, kHypernet };

inline const char* to_string(Conditioning c) {
  switch (c) {
    case Conditioning::kUnconditional: return "unconditional";
    case Conditioning::kConcat: return "concat";
    case Conditioning::kHypernet: return "hypernet";
  }
  return "?";
}

struct FlowModelConfig {
  Conditioning conditioning = Conditioning::kHypernet;
  int num_objectives = 2;
  int trunk_width = 256;
  int trunk_depth = 3;
  int head_hidden = 32;
  int hyper_width = 100;
  int hyper_depth = 3;
  // Initial scale of the hypernetwork output weights relative to He init.
  double hyper_output_scale = 0.1;
  // Fixed multiplier on the hypernetwork readout, W h * m + b. Adam moves
  // every readout weight by about the learning rate, so an unscaled readout
  // moves each generated weight by about lr * sum|h|; m = 1 / width keeps
  // that near lr. m = 1 / sqrt(width) balances this against the slower
  // start of a heavily damped readout. The initial generated heads do not
  // depend on m.
  double hyper_readout = 0.1;
};

using OptionalPreference = std::optional<PreferenceVector>;

/// Everything a batched forward pass records for the backward pass.
struct FlowForward {
  nn::Vector heads;  // edge-head params followed by state-head params
  nn::Matrix hyper_hidden;
  nn::ForwardCache hyper_cache;
  nn::ForwardCache trunk_cache;
  nn::ForwardCache edge_cache;
  nn::Matrix log_edge;  // action slots x samples
};

/// Flow predictor: a shared state encoder (trunk) followed by an edge head
/// (log F(s -> s') per action slot) and a state head (log F(s)).
///
/// Unconditional and Concat own their head parameters; Concat appends the
/// preference to the trunk input. Hypernet generates the head parameters
/// from the preference with an MLP body and one linear output head per
/// target layer, so only the heads depend on the preference.
///
/// All trainable parameters sit in one flat vector: the trunk first, then
/// either the owned heads or the hypernetwork (body, then output heads).
class FlowModel {
 public:
  FlowModel(const Environment& env, FlowModelConfig cfg, Rng& rng)
      : cfg_(cfg), feature_size_(env.feature_size()), actions_(env.action_count()) {
    if (cfg_.num_objectives < 1) {
      throw ContractViolation("FlowModel needs at least one objective");
    }
    const nn::Index in = feature_size_ +
        (cfg_.conditioning == Conditioning::kConcat ? cfg_.num_objectives : 0);
    std::vector<nn::Index> trunk_sizes{in};
    for (int i = 0; i < cfg_.trunk_depth; ++i) trunk_sizes.push_back(cfg_.trunk_width);
    trunk_ = nn::MlpLayout(trunk_sizes, nn::Activation::kLeakyRelu);
    edge_ = nn::MlpLayout({cfg_.trunk_width, cfg_.head_hidden, actions_});
    state_ = nn::MlpLayout({cfg_.trunk_width, cfg_.head_hidden, 1});
    head_count_ = edge_.param_count() + state_.param_count();

    nn::Index offset = trunk_.param_count();
    if (hypernet()) {
      std::vector<nn::Index> body{cfg_.num_objectives};
      for (int i = 0; i < cfg_.hyper_depth; ++i) body.push_back(cfg_.hyper_width);
      hyper_body_ = nn::MlpLayout(body, nn::Activation::kLeakyRelu);
      hyper_body_offset_ = offset;
      offset += hyper_body_.param_count();
      // One generated block per target layer: (weights, bias) of that layer.
      nn::Index target = 0;
      for (const auto* head : {&edge_, &state_}) {
        for (std::size_t l = 0; l < head->num_layers(); ++l) {
          const nn::Index block = head->fan_in(l) * head->fan_out(l) + head->fan_out(l);
          blocks_.push_back({target, block, head->fan_in(l), head->fan_out(l), offset});
          target += block;
          offset += cfg_.hyper_width * block + block;
        }
      }
    } else {
      heads_offset_ = offset;
      offset += head_count_;
    }
    params_ = nn::Vector::Zero(offset);
    params_.segment(0, trunk_.param_count()) = nn::he_uniform(trunk_, rng);
    reinit_heads(rng);
  }

  const FlowModelConfig& config() const { return cfg_; }
  Conditioning conditioning() const { return cfg_.conditioning; }
  bool hypernet() const { return cfg_.conditioning == Conditioning::kHypernet; }
  int action_count() const { return static_cast<int>(actions_); }
  nn::Index feature_size() const { return feature_size_; }

  const nn::MlpLayout& trunk_layout() const { return trunk_; }
  const nn::MlpLayout& edge_head_layout() const { return edge_; }
  const nn::MlpLayout& state_head_layout() const { return state_; }
  const nn::MlpLayout& hyper_body_layout() const { return hyper_body_; }
  nn::Index head_param_count() const { return head_count_; }

  const nn::Vector& params() const { return params_; }
  nn::Vector& params() { return params_; }
  nn::Index param_count() const { return params_.size(); }

  nn::Index trunk_param_count() const { return trunk_.param_count(); }

  /// Parameters at or past this index (the state head, or the hypernetwork
  /// blocks generating it) never receive flow-matching gradient, so
  /// optimizers only need to step the prefix.
  nn::Index loss_param_count() const {
    if (!hypernet()) return heads_offset_ + edge_.param_count();
    for (const auto& b : blocks_) {
      if (b.target >= edge_.param_count()) return b.offset;
    }
    return params_.size();
  }
  auto trunk_params() const { return params_.head(trunk_.param_count()); }
  auto trunk_params() { return params_.head(trunk_.param_count()); }

  /// Re-draws the preference-dependent parameters (owned heads or the
  /// hypernetwork) and keeps the trunk.
  void reinit_heads(Rng& rng) {
    if (!hypernet()) {
      params_.segment(heads_offset_, edge_.param_count()) = nn::he_uniform(edge_, rng);
      params_.segment(heads_offset_ + edge_.param_count(), state_.param_count()) =
          nn::he_uniform(state_, rng);
      return;
    }
    params_.segment(hyper_body_offset_, hyper_body_.param_count()) =
        nn::he_uniform(hyper_body_, rng);
    // Output biases start at an ordinary He draw of the target block, so a
    // fresh hypernetwork generates a normally initialized head plus a small
    // preference-dependent perturbation.
    for (const auto& b : blocks_) {
      const nn::Index w_count = cfg_.hyper_width * b.size;
      const double w_bound = cfg_.hyper_output_scale *
                             std::sqrt(6.0 / static_cast<double>(cfg_.hyper_width)) /
                             cfg_.hyper_readout;
      std::uniform_real_distribution<double> wd(-w_bound, w_bound);
      for (nn::Index i = 0; i < w_count; ++i) params_[b.offset + i] = wd(rng);
      const double t_bound = std::sqrt(6.0 / static_cast<double>(b.fan_in));
      std::uniform_real_distribution<double> td(-t_bound, t_bound);
      const nn::Index target_weights = b.fan_in * b.fan_out;
      for (nn::Index i = 0; i < b.size; ++i) {
        params_[b.offset + w_count + i] = i < target_weights ? td(rng) : 0.0;
      }
    }
  }

  /// Prediction-head parameters for `lambda`: edge head then state head.
  nn::Vector head_params(const OptionalPreference& lambda) const {
    FlowForward scratch;
    generate_heads(lambda, scratch, false);
    return std::move(scratch.heads);
  }

  nn::Matrix trunk_input(const nn::Matrix& features,
                         const OptionalPreference& lambda) const {
    check_lambda(lambda);
    if (features.rows() != feature_size_) {
      throw DimensionError("FlowModel: feature size mismatch");
    }
    if (cfg_.conditioning != Conditioning::kConcat) return features;
    nn::Matrix x(features.rows() + cfg_.num_objectives, features.cols());
    x.topRows(features.rows()) = features;
    x.bottomRows(cfg_.num_objectives) =
        lambda->weights().replicate(1, features.cols());
    return x;
  }

  /// Edge-head parameters for `lambda` (a prefix of head_params).
  nn::Vector edge_head_params(const OptionalPreference& lambda) const {
    FlowForward scratch;
    generate_heads(lambda, scratch, false, true);
    return std::move(scratch.heads);
  }

  /// Log edge flows for a batch of featurized states (one per column).
  /// Entries for illegal actions are meaningless; callers mask them.
  nn::Matrix log_edge_flows(const nn::Matrix& features,
                            const OptionalPreference& lambda) const {
    return log_edge_flows(features, lambda, edge_head_params(lambda));
  }

  /// Same, reusing edge-head parameters from edge_head_params(lambda).
  nn::Matrix log_edge_flows(const nn::Matrix& features,
                            const OptionalPreference& lambda,
                            const nn::Vector& edge_heads) const {
    if (edge_heads.size() < edge_.param_count()) {
      throw DimensionError("FlowModel: edge-head parameter size mismatch");
    }
    nn::Matrix h = nn::forward(trunk_, params_.head(trunk_.param_count()),
                               trunk_input(features, lambda));
    return nn::forward(edge_, edge_heads.head(edge_.param_count()), h);
  }

  /// Log state flows from the state head (diagnostic only).
  nn::Vector log_state_flows(const nn::Matrix& features,
                             const OptionalPreference& lambda) const {
    FlowForward f;
    generate_heads(lambda, f, false);
    nn::Matrix h = nn::forward(trunk_, params_.head(trunk_.param_count()),
                               trunk_input(features, lambda));
    nn::Matrix out =
        nn::forward(state_, f.heads.segment(edge_.param_count(), state_.param_count()), h);
    return out.row(0).transpose();
  }

  FlowForward forward_train(const nn::Matrix& features,
                            const OptionalPreference& lambda) const {
    FlowForward f;
    // The state head is not part of the loss, so only edge heads are built.
    generate_heads(lambda, f, true, true);
    nn::Matrix h = nn::forward(trunk_, params_.head(trunk_.param_count()),
                               trunk_input(features, lambda), &f.trunk_cache);
    f.log_edge = nn::forward(edge_, f.heads.head(edge_.param_count()), h,
                             &f.edge_cache);
    return f;
  }

  /// Accumulates dL/dparams into `grad` given dL/d(log edge flows).
  void backward(const FlowForward& f, const nn::Matrix& d_log_edge,
                nn::Vector& grad) const {
    if (grad.size() != params_.size()) {
      throw DimensionError("FlowModel::backward: gradient size mismatch");
    }
    nn::Vector d_heads = nn::Vector::Zero(f.heads.size());
    nn::Matrix d_hidden = nn::backward(edge_, f.heads.head(edge_.param_count()),
                                       f.edge_cache, d_log_edge,
                                       d_heads.head(edge_.param_count()));
    nn::backward(trunk_, params_.head(trunk_.param_count()), f.trunk_cache,
                 d_hidden, grad.head(trunk_.param_count()));
    if (!hypernet()) {
      grad.segment(heads_offset_, d_heads.size()) += d_heads;
      return;
    }
    nn::Matrix d_body = nn::Matrix::Zero(cfg_.hyper_width, 1);
    for (const auto& b : blocks_) {
      if (b.target >= d_heads.size()) break;
      const auto d_block = d_heads.segment(b.target, b.size);
      Eigen::Map<nn::Matrix> dw(grad.data() + b.offset, b.size, cfg_.hyper_width);
      Eigen::Map<const nn::Matrix> w(params_.data() + b.offset, b.size,
                                     cfg_.hyper_width);
      dw.noalias() += cfg_.hyper_readout * (d_block * f.hyper_hidden.transpose());
      grad.segment(b.offset + cfg_.hyper_width * b.size, b.size) += d_block;
      d_body.noalias() += cfg_.hyper_readout * (w.transpose() * d_block);
    }
    nn::backward(hyper_body_,
                 params_.segment(hyper_body_offset_, hyper_body_.param_count()),
                 f.hyper_cache, d_body,
                 grad.segment(hyper_body_offset_, hyper_body_.param_count()));
  }

 private:
  struct Block {
    nn::Index target;  // offset inside the head parameter vector
    nn::Index size;
    nn::Index fan_in;
    nn::Index fan_out;
    nn::Index offset;  // offset of the output layer inside params_
  };

  void check_lambda(const OptionalPreference& lambda) const {
    if (cfg_.conditioning == Conditioning::kUnconditional) return;
    if (!lambda) {
      throw ContractViolation(std::string("a preference vector is required for ") +
                              to_string(cfg_.conditioning) + " conditioning");
    }
    if (lambda->size() != cfg_.num_objectives) {
      throw DimensionError("preference has " + std::to_string(lambda->size()) +
                           " weights, model expects " +
                           std::to_string(cfg_.num_objectives));
    }
  }

  void generate_heads(const OptionalPreference& lambda, FlowForward& f,
                      bool keep_cache, bool edge_only = false) const {
    check_lambda(lambda);
    const nn::Index count = edge_only ? edge_.param_count() : head_count_;
    if (!hypernet()) {
      f.heads = params_.segment(heads_offset_, count);
      return;
    }
    nn::Matrix in = lambda->weights();
    f.hyper_hidden = nn::forward(
        hyper_body_, params_.segment(hyper_body_offset_, hyper_body_.param_count()),
        in, keep_cache ? &f.hyper_cache : nullptr);
    f.heads.resize(count);
    for (const auto& b : blocks_) {
      if (b.target >= count) break;
      Eigen::Map<const nn::Matrix> w(params_.data() + b.offset, b.size,
                                     cfg_.hyper_width);
      f.heads.segment(b.target, b.size) =
          cfg_.hyper_readout * (w * f.hyper_hidden.col(0)) +
          params_.segment(b.offset + cfg_.hyper_width * b.size, b.size);
    }
  }

  FlowModelConfig cfg_;
  nn::Index feature_size_;
  nn::Index actions_;
  nn::MlpLayout trunk_;
  nn::MlpLayout edge_;
  nn::MlpLayout state_;
  nn::MlpLayout hyper_body_;
  nn::Index head_count_ = 0;
  nn::Index heads_offset_ = 0;
  nn::Index hyper_body_offset_ = 0;
  std::vector<Block> blocks_;
  nn::Vector params_;
};

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline nn::Matrix featurize_batch(const Environment& env,
                                  const std::vector<State>& states) {
  nn::Matrix f = nn::Matrix::Zero(env.feature_size(),
                                  static_cast<nn::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    env.write_features(states[i], f.col(static_cast<nn::Index>(i)).data());
  }
  return f;
}

/// Softmax of the legal entries of one column of log edge flows, returned
/// per action slot (illegal slots get exactly 0).
inline std::vector<double> masked_softmax(const nn::Matrix& log_edge,
                                          nn::Index col,
                                          const std::vector<bool>& legal) {
  std::vector<double> p(legal.size(), 0.0);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < legal.size(); ++a) {
    if (legal[a]) m = std::max(m, log_edge(static_cast<nn::Index>(a), col));
  }
  double z = 0.0;
  for (std::size_t a = 0; a < legal.size(); ++a) {
    if (legal[a]) {
      p[a] = std::exp(log_edge(static_cast<nn::Index>(a), col) - m);
      z += p[a];
    }
  }
  for (double& v : p) v /= z;
  return p;
}

struct LogFlows {
  std::vector<Action> actions;   // allowed actions of the state
  std::vector<double> log_edge;  // log F(s -> s') per allowed action
  double log_state = 0.0;        // state head output
};

inline LogFlows log_edge_flows(const FlowModel& model, const Environment& env,
                               const OptionalPreference& lambda, const State& s) {
  if (s.terminal) {
    throw ContractViolation("log_edge_flows called on a terminal state");
  }
  nn::Matrix f = featurize_batch(env, {s});
  nn::Matrix q = model.log_edge_flows(f, lambda);
  LogFlows out;
  out.actions = env.allowed_actions(s);
  for (const auto& a : out.actions) {
    out.log_edge.push_back(q(Environment::slot(a), 0));
  }
  out.log_state = model.log_state_flows(f, lambda)[0];
  return out;
}

/// P(s'|s) = F(s -> s') / sum of legal edge flows, ordered like
/// env.allowed_actions(s).
inline std::vector<double> forward_policy(const FlowModel& model,
                                          const Environment& env,
                                          const OptionalPreference& lambda,
                                          const State& s) {
  LogFlows flows = log_edge_flows(model, env, lambda, s);
  const double lse = log_sum_exp(flows.log_edge);
  std::vector<double> p;
  for (double l : flows.log_edge) p.push_back(std::exp(l - lse));
  return p;
}

/// Policy over action slots for every state in `states` (one batched pass).
inline std::vector<std::vector<double>> policy_table(
    const FlowModel& model, const Environment& env,
    const OptionalPreference& lambda, const std::vector<State>& states) {
  nn::Matrix q = model.log_edge_flows(featurize_batch(env, states), lambda);
  std::vector<std::vector<double>> out;
  out.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.push_back(masked_softmax(q, static_cast<nn::Index>(i), env.legal_slots(states[i])));
  }
  return out;
}

/// Rollout that picks uniformly among allowed actions at every step.
inline Trajectory uniform_rollout(const Environment& env, Rng& rng) {
  Trajectory t;
  State s = env.initial_state();
  while (true) {
    auto actions = env.allowed_actions(s);
    const Action a = actions[uniform_index(rng, actions.size())];
    t.steps.push_back({s, a});
    if (a.is_stop()) return t;
    s = env.apply(s, a);
  }
}

/// `count` rollouts advanced in lock-step so that each step is one batched
/// network evaluation. At every step an action is drawn uniformly among the
/// allowed ones with probability `epsilon`, otherwise from the policy.
inline std::vector<Trajectory> sample_trajectories(
    const FlowModel& model, const Environment& env,
    const OptionalPreference& lambda, double epsilon, std::size_t count,
    Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ContractViolation("exploration epsilon must lie in [0, 1]");
  }
  std::vector<Trajectory> out(count);
  std::vector<State> current(count, env.initial_state());
  std::vector<std::size_t> active(count);
  std::iota(active.begin(), active.end(), 0);
  nn::Vector heads;
  if (epsilon < 1.0) heads = model.edge_head_params(lambda);
  while (!active.empty()) {
    std::vector<State> batch;
    for (std::size_t i : active) batch.push_back(current[i]);
    nn::Matrix q;
    if (epsilon < 1.0) q = model.log_edge_flows(featurize_batch(env, batch), lambda, heads);
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t i = active[k];
      const auto legal = env.legal_slots(current[i]);
      int slot = -1;
      if (epsilon >= 1.0 || uniform01(rng) < epsilon) {
        std::vector<int> slots;
        for (std::size_t a = 0; a < legal.size(); ++a) {
          if (legal[a]) slots.push_back(static_cast<int>(a));
        }
        slot = slots[uniform_index(rng, slots.size())];
      } else {
        const auto p = masked_softmax(q, static_cast<nn::Index>(k), legal);
        const double u = uniform01(rng);
        double acc = 0.0;
        for (std::size_t a = 0; a < p.size(); ++a) {
          if (!legal[a]) continue;
          acc += p[a];
          slot = static_cast<int>(a);
          if (u < acc) break;
        }
      }
      const Action a = Environment::action_at(slot);
      out[i].steps.push_back({current[i], a});
      if (!a.is_stop()) {
        current[i] = env.apply(current[i], a);
        still.push_back(i);
      }
    }
    active = std::move(still);
  }
  return out;
}

inline Trajectory sample_trajectory(const FlowModel& model, const Environment& env,
                                    const OptionalPreference& lambda,
                                    double epsilon, Rng& rng) {
  return std::move(sample_trajectories(model, env, lambda, epsilon, 1, rng).front());
}

struct FmResult {
  double loss = 0.0;
  nn::Vector grad;                // empty unless requested
  std::vector<double> per_state;  // squared log mismatch of each state
};

/// Flow-matching loss averaged over `states` (none may be the initial
/// state). For every state the inflow is the log-sum-exp of the parents'
/// edge flows into it; the outflow is log R(x) for a terminal state and the
/// log-sum-exp of its legal edge flows otherwise. `rewards[i]` is read only
/// for terminal states and must be positive there.
inline FmResult fm_loss(const FlowModel& model, const Environment& env,
                        const OptionalPreference& lambda,
                        const std::vector<State>& states,
                        const std::vector<double>& rewards,
                        bool with_grad = true) {
  if (states.size() != rewards.size()) {
    throw DimensionError("fm_loss: one reward per state is required");
  }
  if (states.empty()) throw ContractViolation("fm_loss: empty batch");

  std::unordered_map<State, nn::Index, StateHash> index;
  std::vector<State> evals;
  auto intern = [&](const State& s) {
    auto [it, inserted] = index.try_emplace(s, static_cast<nn::Index>(evals.size()));
    if (inserted) evals.push_back(s);
    return it->second;
  };

  struct Edge {
    nn::Index col;
    nn::Index slot;
  };
  std::vector<std::vector<Edge>> inflow(states.size());
  std::vector<nn::Index> self(states.size(), -1);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const State& s = states[i];
    if (env.is_initial(s)) {
      throw ContractViolation("fm_loss: the initial state has no parents");
    }
    if (s.terminal && !(rewards[i] > 0.0 && std::isfinite(rewards[i]))) {
      throw ContractViolation("fm_loss: terminal reward must be positive and finite");
    }
    for (const auto& [p, a] : env.parents(s)) {
      inflow[i].push_back({intern(p), Environment::slot(a)});
    }
    if (!s.terminal) self[i] = intern(s);
  }

  FlowForward fwd = model.forward_train(featurize_batch(env, evals), lambda);
  const nn::Matrix& q = fwd.log_edge;
  std::vector<std::vector<bool>> legal(evals.size());
  for (std::size_t j = 0; j < evals.size(); ++j) legal[j] = env.legal_slots(evals[j]);

  FmResult result;
  result.per_state.resize(states.size());
  nn::Matrix dq = nn::Matrix::Zero(q.rows(), q.cols());
  const double n = static_cast<double>(states.size());
  std::vector<double> terms;
  for (std::size_t i = 0; i < states.size(); ++i) {
    terms.clear();
    for (const auto& e : inflow[i]) terms.push_back(q(e.slot, e.col));
    const double log_in = log_sum_exp(terms);
    double log_out;
    if (states[i].terminal) {
      log_out = std::log(rewards[i]);
    } else {
      terms.clear();
      const auto& mask = legal[static_cast<std::size_t>(self[i])];
      for (std::size_t a = 0; a < mask.size(); ++a) {
        if (mask[a]) terms.push_back(q(static_cast<nn::Index>(a), self[i]));
      }
      log_out = log_sum_exp(terms);
    }
    const double diff = log_in - log_out;
    result.per_state[i] = diff * diff;
    result.loss += diff * diff;
    if (!with_grad) continue;
    const double coef = 2.0 * diff / n;
    for (const auto& e : inflow[i]) {
      dq(e.slot, e.col) += coef * std::exp(q(e.slot, e.col) - log_in);
    }
    if (!states[i].terminal) {
      const auto& mask = legal[static_cast<std::size_t>(self[i])];
      for (std::size_t a = 0; a < mask.size(); ++a) {
        if (!mask[a]) continue;
        const auto slot = static_cast<nn::Index>(a);
        dq(slot, self[i]) -= coef * std::exp(q(slot, self[i]) - log_out);
      }
    }
  }
  result.loss /= n;
  if (!std::isfinite(result.loss)) throw NumericError("fm_loss is not finite");
  if (with_grad) {
    result.grad = nn::Vector::Zero(model.param_count());
    model.backward(fwd, dq, result.grad);
  }
  return result;
}

/// Every non-initial state visited by the trajectories, in order, with the
/// terminal state of each trajectory last.
inline std::vector<State> trajectory_states(const std::vector<Trajectory>& ts) {
  std::vector<State> out;
  for (const auto& t : ts) {
    for (std::size_t i = 1; i < t.steps.size(); ++i) out.push_back(t.steps[i].state);
    out.push_back(t.terminal_state());
  }
  return out;
}

}  // namespace hngfn

#endif  // HNGFN_GFLOWNET_HPP_
