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

#ifndef HNGFN_EXACT_HPP_
#define HNGFN_EXACT_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hngfn/env.hpp"
#include "hngfn/error.hpp"
#include "hngfn/gflownet.hpp"
#include "hngfn/pareto.hpp"
#include "hngfn/random.hpp"

namespace hngfn {

/// Probability of every terminal state of an enumerable environment.
/// Terminals are stored in enumeration order so two distributions over the
/// same environment line up index by index.
struct ExactDistribution {
  std::vector<State> terminals;
  std::vector<double> probs;
  double partition = std::numeric_limits<double>::quiet_NaN();  // Z = sum R

  double total() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }

  double prob(const State& x) const {
    for (std::size_t i = 0; i < terminals.size(); ++i) {
      if (terminals[i] == x) return probs[i];
    }
    return 0.0;
  }

  std::unordered_map<State, double, StateHash> as_map() const {
    std::unordered_map<State, double, StateHash> m;
    for (std::size_t i = 0; i < terminals.size(); ++i) m.emplace(terminals[i], probs[i]);
    return m;
  }
};

/// L1 distance between two distributions over the same terminal ordering.
inline double l1_distance(const ExactDistribution& a, const ExactDistribution& b) {
  if (a.terminals.size() != b.terminals.size()) {
    throw DimensionError("l1_distance: distributions have different supports");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) s += std::abs(a.probs[i] - b.probs[i]);
  return s;
}

/// Per-slot action probabilities of a policy at a non-terminal state.
using SlotPolicy = std::function<std::vector<double>(const State&)>;

namespace detail {

inline ExactDistribution push_mass(const Environment& env,
                                   const std::vector<State>& nonterminal,
                                   const std::vector<std::vector<double>>& table) {
  std::unordered_map<State, std::size_t, StateHash> index;
  for (std::size_t i = 0; i < nonterminal.size(); ++i) index.emplace(nonterminal[i], i);
  std::vector<double> mass(nonterminal.size(), 0.0);
  ExactDistribution out;
  out.terminals.reserve(nonterminal.size());
  out.probs.assign(nonterminal.size(), 0.0);
  mass[index.at(env.initial_state())] = 1.0;
  // nonterminal is topologically sorted, so mass[i] is final when visited.
  for (std::size_t i = 0; i < nonterminal.size(); ++i) {
    const State& s = nonterminal[i];
    State x = s;
    x.terminal = true;
    out.terminals.push_back(std::move(x));
    if (mass[i] == 0.0) continue;
    const auto& p = table[i];
    out.probs[i] += mass[i] * p[0];
    for (int k = 0; k < env.num_components(); ++k) {
      const double pk = p[static_cast<std::size_t>(k + 1)];
      if (pk == 0.0) continue;
      State child = s;
      child.counts[static_cast<std::size_t>(k)] += 1;
      mass[index.at(child)] += mass[i] * pk;
    }
  }
  const double total = out.total();
  if (!(std::abs(total - 1.0) <= 1e-9)) {
    throw NumericError("exact policy distribution lost mass: total = " +
                       std::to_string(total));
  }
  return out;
}

}  // namespace detail

/// Forward dynamic program: mass(s0) = 1, pushed along every edge with the
/// policy's transition probabilities.
inline ExactDistribution exact_policy_distribution(const Environment& env,
                                                   const SlotPolicy& policy) {
  const auto nonterminal = env.enumerate_nonterminal();
  std::vector<std::vector<double>> table;
  table.reserve(nonterminal.size());
  for (const auto& s : nonterminal) table.push_back(policy(s));
  return detail::push_mass(env, nonterminal, table);
}

inline ExactDistribution exact_policy_distribution(const FlowModel& model,
                                                   const OptionalPreference& lambda,
                                                   const Environment& env) {
  const auto nonterminal = env.enumerate_nonterminal();
  return detail::push_mass(env, nonterminal,
                           policy_table(model, env, lambda, nonterminal));
}

/// pi*(x) = R(x) / Z over all terminals.
inline ExactDistribution exact_target_distribution(
    const std::function<double(const State&)>& reward, const Environment& env) {
  ExactDistribution out;
  out.terminals = env.enumerate_terminals();
  out.probs.reserve(out.terminals.size());
  double z = 0.0;
  for (const auto& x : out.terminals) {
    const double r = reward(x);
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw ContractViolation("reward must be finite and non-negative");
    }
    out.probs.push_back(r);
    z += r;
  }
  if (!(z > 0.0)) {
    throw UndefinedMetric("target distribution undefined: all rewards are zero");
  }
  for (double& p : out.probs) p /= z;
  out.partition = z;
  return out;
}

/// Nondominated set over every terminal of the environment. Member ids index
/// into env.enumerate_terminals().
inline ParetoFront exact_pareto_front(
    const std::function<ObjectiveVector(const State&)>& objectives,
    const Environment& env, ObjectiveVector reference = {}) {
  std::vector<ObjectiveVector> values;
  for (const auto& x : env.enumerate_terminals()) values.push_back(objectives(x));
  return pareto_front(values, std::move(reference));
}

struct McEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo hypervolume: uniform samples in the box spanned by the
/// reference point and the component-wise maximum.
inline McEstimate mc_hypervolume(const std::vector<ObjectiveVector>& points,
                                 const ObjectiveVector& reference,
                                 std::size_t samples, Rng& rng) {
  if (samples < 10000) {
    throw ContractViolation("mc_hypervolume needs at least 1e4 samples");
  }
  if (points.empty()) return {};
  const auto front = pareto_front(points, reference).values();
  ObjectiveVector upper = reference;
  for (const auto& p : front) upper = upper.cwiseMax(p);
  const ObjectiveVector span = upper - reference;
  const double volume = span.prod();
  if (volume <= 0.0) return {};
  std::size_t hits = 0;
  ObjectiveVector u(reference.size());
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      u[i] = reference[i] + span[i] * uniform01(rng);
    }
    for (const auto& p : front) {
      if ((p.array() >= u.array()).all()) {
        ++hits;
        break;
      }
    }
  }
  const double n = static_cast<double>(samples);
  const double frac = static_cast<double>(hits) / n;
  return {frac * volume, volume * std::sqrt(frac * (1.0 - frac) / n)};
}

}  // namespace hngfn

#endif  // HNGFN_EXACT_HPP_
