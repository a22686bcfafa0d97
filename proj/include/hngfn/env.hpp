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

#ifndef HNGFN_ENV_HPP_
#define HNGFN_ENV_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hngfn/error.hpp"
#include "hngfn/random.hpp"

namespace hngfn {

enum class EnvKind { kHyperGrid, kBagBuilder };

/// Discrete compositional environment description.
///
/// HyperGrid(D, H): states are coordinates in {0..H-1}^D, an action
/// increments one coordinate. BagBuilder(V, T): states are multisets over V
/// tokens holding at most T items, an action adds one token. Both start from
/// the all-zero state and end with an explicit stop action.
struct EnvSpec {
  EnvKind kind = EnvKind::kHyperGrid;
  int components = 2;  // D or V
  int extent = 4;      // H or T
  std::size_t enumeration_cap = 200000;

  static EnvSpec hyper_grid(int dims, int side) {
    return {EnvKind::kHyperGrid, dims, side};
  }
  static EnvSpec bag_builder(int vocab, int max_items) {
    return {EnvKind::kBagBuilder, vocab, max_items};
  }

  std::string describe() const {
    std::ostringstream s;
    if (kind == EnvKind::kHyperGrid) {
      s << "HyperGrid(D=" << components << ",H=" << extent << ")";
    } else {
      s << "BagBuilder(V=" << components << ",T=" << extent << ")";
    }
    return s.str();
  }

  std::uint64_t hash() const { return fnv1a(describe()); }

  bool operator==(const EnvSpec& o) const {
    return kind == o.kind && components == o.components && extent == o.extent;
  }
};

struct State {
  std::vector<int> counts;
  bool terminal = false;

  int total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

  friend bool operator==(const State& a, const State& b) {
    return a.terminal == b.terminal && a.counts == b.counts;
  }
  friend bool operator!=(const State& a, const State& b) { return !(a == b); }
  // Ordering by (item total, terminal flag, counts): a topological order.
  friend bool operator<(const State& a, const State& b) {
    const int ta = a.total();
    const int tb = b.total();
    if (ta != tb) return ta < tb;
    if (a.terminal != b.terminal) return !a.terminal;
    return a.counts < b.counts;
  }
};

struct StateHash {
  std::size_t operator()(const State& s) const {
    std::uint64_t h = s.terminal ? 0x51ed270b27ULL : 0x2545f4914fULL;
    for (int c : s.counts) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
    return static_cast<std::size_t>(h);
  }
};

struct Action {
  enum class Kind { kStop, kExtend };
  Kind kind = Kind::kStop;
  int index = -1;

  static Action stop() { return {Kind::kStop, -1}; }
  static Action extend(int i) { return {Kind::kExtend, i}; }
  bool is_stop() const { return kind == Kind::kStop; }

  friend bool operator==(const Action& a, const Action& b) {
    return a.kind == b.kind && a.index == b.index;
  }
};

struct Step {
  State state;
  Action action;
};

/// (state, action) pairs from the initial state; the last action is Stop.
struct Trajectory {
  std::vector<Step> steps;

  State terminal_state() const {
    State x = steps.back().state;
    x.terminal = true;
    return x;
  }
  std::size_t length() const { return steps.size(); }
};

class Environment {
 public:
  explicit Environment(EnvSpec spec) : spec_(spec) {
    if (spec_.components < 1 || spec_.extent < 1) {
      throw ContractViolation("environment parameters must be positive: " +
                              spec_.describe());
    }
    if (spec_.kind == EnvKind::kHyperGrid && spec_.extent < 2) {
      throw ContractViolation("HyperGrid side length must be at least 2");
    }
  }

  const EnvSpec& spec() const { return spec_; }
  bool is_grid() const { return spec_.kind == EnvKind::kHyperGrid; }
  int num_components() const { return spec_.components; }
  int extent() const { return spec_.extent; }

  // Action slots: 0 is Stop, i + 1 is Extend(i).
  int action_count() const { return spec_.components + 1; }
  static int slot(const Action& a) { return a.is_stop() ? 0 : a.index + 1; }
  static Action action_at(int slot) {
    return slot == 0 ? Action::stop() : Action::extend(slot - 1);
  }

  State initial_state() const {
    return State{std::vector<int>(static_cast<std::size_t>(spec_.components), 0),
                 false};
  }

  bool is_initial(const State& s) const {
    return !s.terminal && s.total() == 0;
  }

  bool can_extend(const State& s, int i) const {
    if (s.terminal || i < 0 || i >= spec_.components) return false;
    if (is_grid()) return s.counts[static_cast<std::size_t>(i)] < spec_.extent - 1;
    return s.total() < spec_.extent;
  }

  std::vector<Action> allowed_actions(const State& s) const {
    check_state(s);
    if (s.terminal) {
      throw ContractViolation("allowed_actions called on a terminal state");
    }
    std::vector<Action> out{Action::stop()};
    for (int i = 0; i < spec_.components; ++i) {
      if (can_extend(s, i)) out.push_back(Action::extend(i));
    }
    return out;
  }

  // Legal-action mask indexed by slot.
  std::vector<bool> legal_slots(const State& s) const {
    std::vector<bool> mask(static_cast<std::size_t>(action_count()), false);
    for (const auto& a : allowed_actions(s)) {
      mask[static_cast<std::size_t>(slot(a))] = true;
    }
    return mask;
  }

  State apply(const State& s, const Action& a) const {
    check_state(s);
    if (s.terminal) throw ContractViolation("cannot act on a terminal state");
    State next = s;
    if (a.is_stop()) {
      next.terminal = true;
      return next;
    }
    if (!can_extend(s, a.index)) {
      throw ContractViolation("illegal action Extend(" +
                              std::to_string(a.index) + ") in state " +
                              encode(s));
    }
    next.counts[static_cast<std::size_t>(a.index)] += 1;
    return next;
  }

  /// Every (parent, action) pair leading to `s`. A terminal state has its
  /// non-terminal twin as the only parent; the initial state has none.
  std::vector<std::pair<State, Action>> parents(const State& s) const {
    check_state(s);
    std::vector<std::pair<State, Action>> out;
    if (s.terminal) {
      State twin = s;
      twin.terminal = false;
      out.emplace_back(std::move(twin), Action::stop());
      return out;
    }
    for (int i = 0; i < spec_.components; ++i) {
      if (s.counts[static_cast<std::size_t>(i)] > 0) {
        State p = s;
        p.counts[static_cast<std::size_t>(i)] -= 1;
        out.emplace_back(std::move(p), Action::extend(i));
      }
    }
    return out;
  }

  /// Number of non-terminal states (equal to the number of terminals).
  double nonterminal_count() const {
    if (is_grid()) return std::pow(double(spec_.extent), spec_.components);
    // C(V + T, T) non-negative count vectors with sum <= T.
    double c = 1.0;
    for (int k = 1; k <= spec_.extent; ++k) {
      c = c * double(spec_.components + k) / double(k);
    }
    return std::round(c);
  }

  double state_count() const { return 2.0 * nonterminal_count(); }

  /// All states in topological order (parents first). Non-terminal states
  /// of a given item total precede their terminal twins.
  std::vector<State> enumerate_states() const {
    check_enumerable();
    std::vector<State> nonterminal = enumerate_nonterminal();
    std::vector<State> out;
    out.reserve(nonterminal.size() * 2);
    std::size_t i = 0;
    while (i < nonterminal.size()) {
      const int level = nonterminal[i].total();
      std::size_t j = i;
      while (j < nonterminal.size() && nonterminal[j].total() == level) {
        out.push_back(nonterminal[j++]);
      }
      for (std::size_t k = i; k < j; ++k) {
        State x = nonterminal[k];
        x.terminal = true;
        out.push_back(std::move(x));
      }
      i = j;
    }
    return out;
  }

  /// Non-terminal states sorted by (item total, counts).
  std::vector<State> enumerate_nonterminal() const {
    check_enumerable();
    std::vector<State> out;
    std::vector<int> counts(static_cast<std::size_t>(spec_.components), 0);
    const int limit = is_grid() ? spec_.extent - 1 : spec_.extent;
    // Odometer over {0..limit}^components, filtered for bags.
    while (true) {
      const int sum = std::accumulate(counts.begin(), counts.end(), 0);
      if (is_grid() || sum <= spec_.extent) out.push_back(State{counts, false});
      std::size_t d = 0;
      while (d < counts.size()) {
        if (counts[d] < limit) {
          ++counts[d];
          break;
        }
        counts[d] = 0;
        ++d;
      }
      if (d == counts.size()) break;
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<State> enumerate_terminals() const {
    auto out = enumerate_nonterminal();
    for (auto& s : out) s.terminal = true;
    return out;
  }

  /// Flow-network input features. HyperGrid: one-hot per dimension (D * H).
  /// BagBuilder: per-token count / T followed by the fill fraction (V + 1).
  Eigen::Index feature_size() const {
    return is_grid() ? spec_.components * spec_.extent : spec_.components + 1;
  }

  Eigen::VectorXd featurize(const State& s) const {
    check_state(s);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(feature_size());
    write_features(s, f.data());
    return f;
  }

  void write_features(const State& s, double* out) const {
    const int n = spec_.components;
    if (is_grid()) {
      for (int d = 0; d < n; ++d) out[d * spec_.extent + s.counts[std::size_t(d)]] = 1.0;
    } else {
      const double t = spec_.extent;
      for (int i = 0; i < n; ++i) out[i] = s.counts[std::size_t(i)] / t;
      out[n] = s.total() / t;
    }
  }

  /// Normalized feature histogram used by the synthetic objectives: one bin
  /// per component (progress along a grid dimension, or token count) plus a
  /// slack bin holding the unused capacity. Sums to 1.
  Eigen::VectorXd feature_histogram(const State& s) const {
    check_state(s);
    const int n = spec_.components;
    const double capacity =
        is_grid() ? double(n) * (spec_.extent - 1) : double(spec_.extent);
    Eigen::VectorXd p(n + 1);
    for (int i = 0; i < n; ++i) p[i] = s.counts[std::size_t(i)] / capacity;
    p[n] = (capacity - s.total()) / capacity;
    return p;
  }

  /// Terminal state that pushes component `m` as far as it goes.
  State corner(int m) const {
    State x = initial_state();
    x.counts[std::size_t(m)] = is_grid() ? spec_.extent - 1 : spec_.extent;
    x.terminal = true;
    return x;
  }

  std::size_t max_trajectory_length() const {
    if (is_grid()) return std::size_t(spec_.components) * (spec_.extent - 1) + 1;
    return std::size_t(spec_.extent) + 1;
  }

  /// Walks uniformly random parents from `x` back to the initial state.
  Trajectory backward_trajectory(const State& x, Rng& rng) const {
    if (!x.terminal) {
      throw ContractViolation("backward_trajectory needs a terminal state");
    }
    check_state(x);
    Trajectory t;
    State s = x;
    s.terminal = false;
    t.steps.push_back({s, Action::stop()});
    while (!is_initial(s)) {
      auto ps = parents(s);
      auto& [p, a] = ps[uniform_index(rng, ps.size())];
      t.steps.push_back({p, a});
      s = p;
    }
    std::reverse(t.steps.begin(), t.steps.end());
    return t;
  }

  /// Throws ContractViolation unless `t` is a legal complete trajectory.
  void validate(const Trajectory& t) const {
    if (t.steps.empty()) throw ContractViolation("empty trajectory");
    if (!is_initial(t.steps.front().state)) {
      throw ContractViolation("trajectory does not start at the initial state");
    }
    if (t.steps.size() > max_trajectory_length()) {
      throw ContractViolation("trajectory longer than the environment cap");
    }
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const State next = apply(t.steps[i].state, t.steps[i].action);
      const bool last = i + 1 == t.steps.size();
      if (last != t.steps[i].action.is_stop()) {
        throw ContractViolation("Stop must be exactly the last action");
      }
      if (!last && next != t.steps[i + 1].state) {
        throw ContractViolation("trajectory step " + std::to_string(i) +
                                " is not a legal edge");
      }
    }
  }

  /// Compact text form, e.g. "3-0-2" (counts) with a trailing "$" if terminal.
  static std::string encode(const State& s) {
    std::string out;
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
      if (i > 0) out += '-';
      out += std::to_string(s.counts[i]);
    }
    if (s.terminal) out += '$';
    return out;
  }

  State decode(const std::string& text) const {
    State s;
    std::string body = text;
    if (!body.empty() && body.back() == '$') {
      s.terminal = true;
      body.pop_back();
    }
    std::stringstream in(body);
    std::string tok;
    while (std::getline(in, tok, '-')) s.counts.push_back(std::stoi(tok));
    check_state(s);
    return s;
  }

 private:
  void check_state(const State& s) const {
    if (s.counts.size() != static_cast<std::size_t>(spec_.components)) {
      throw DimensionError("state has " + std::to_string(s.counts.size()) +
                           " components, environment expects " +
                           std::to_string(spec_.components));
    }
    for (int c : s.counts) {
      if (c < 0) throw ContractViolation("state has a negative component");
    }
  }

  void check_enumerable() const {
    if (state_count() > double(spec_.enumeration_cap)) {
      std::ostringstream msg;
      msg << spec_.describe() << " has " << state_count()
          << " states, above the enumeration cap of " << spec_.enumeration_cap;
      throw SizeError(msg.str());
    }
  }

  EnvSpec spec_;
};

}  // namespace hngfn

#endif  // HNGFN_ENV_HPP_
