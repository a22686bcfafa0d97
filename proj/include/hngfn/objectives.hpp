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

#ifndef HNGFN_OBJECTIVES_HPP_
#define HNGFN_OBJECTIVES_HPP_

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hngfn/env.hpp"
#include "hngfn/error.hpp"
#include "hngfn/pareto.hpp"

namespace hngfn {

/// Black-box objectives for the synthetic benchmarks:
///   f_m(x) = 1 - 0.5 * || p(x) - c_m ||_1
/// where p(x) is Environment::feature_histogram(x) and c_m a target profile
/// on the same simplex. Every f_m lies in [0, 1].
class SyntheticOracle {
 public:
  explicit SyntheticOracle(std::vector<Eigen::VectorXd> profiles)
      : profiles_(std::move(profiles)) {
    if (profiles_.empty()) throw ContractViolation("oracle needs at least one profile");
    for (std::size_t m = 0; m < profiles_.size(); ++m) {
      const auto& c = profiles_[m];
      if (c.size() != profiles_.front().size()) {
        throw DimensionError("oracle profiles must have equal length");
      }
      if ((c.array() < 0.0).any() || std::abs(c.sum() - 1.0) > 1e-9) {
        throw ContractViolation("oracle profile is not a probability vector: " +
                                format_vector(c));
      }
      for (std::size_t k = 0; k < m; ++k) {
        if (profiles_[k] == c) throw ContractViolation("oracle profiles must differ");
      }
    }
  }

  /// Conflicting reference objectives. The first two profiles are the
  /// histograms of the corners pushing component 0 and the last component
  /// to the limit; a third asks for an even spread over all components with
  /// no slack; a fourth asks for an empty object (all slack).
  static SyntheticOracle reference(const Environment& env, int num_objectives) {
    if (num_objectives < 1 || num_objectives > 4) {
      throw ContractViolation("reference oracle supports 1 to 4 objectives");
    }
    const int n = env.num_components();
    std::vector<Eigen::VectorXd> c;
    c.push_back(env.feature_histogram(env.corner(0)));
    if (num_objectives >= 2) c.push_back(env.feature_histogram(env.corner(n - 1)));
    if (num_objectives >= 3) {
      Eigen::VectorXd even = Eigen::VectorXd::Constant(n + 1, 1.0 / n);
      even[n] = 0.0;
      c.push_back(even);
    }
    if (num_objectives >= 4) {
      Eigen::VectorXd empty = Eigen::VectorXd::Zero(n + 1);
      empty[n] = 1.0;
      c.push_back(empty);
    }
    return SyntheticOracle(std::move(c));
  }

  int num_objectives() const { return static_cast<int>(profiles_.size()); }
  const std::vector<Eigen::VectorXd>& profiles() const { return profiles_; }

  ObjectiveVector evaluate(const Environment& env, const State& x) const {
    if (!x.terminal) {
      throw ContractViolation("the oracle only evaluates terminal states");
    }
    const Eigen::VectorXd p = env.feature_histogram(x);
    if (p.size() != profiles_.front().size()) {
      throw DimensionError("oracle profile length does not match the environment");
    }
    ObjectiveVector f(num_objectives());
    for (int m = 0; m < num_objectives(); ++m) f[m] = score(p, profiles_[std::size_t(m)]);
    return f;
  }

  // One minus the total-variation distance between two histograms, snapped
  // to a 1e-12 grid so that objects at equal distances compare
  // equal regardless of summation order.
  static double score(const Eigen::VectorXd& p, const Eigen::VectorXd& c) {
    return std::round((1.0 - 0.5 * (p - c).lpNorm<1>()) * 1e12) / 1e12;
  }

 private:
  std::vector<Eigen::VectorXd> profiles_;
};

}  // namespace hngfn

#endif  // HNGFN_OBJECTIVES_HPP_
