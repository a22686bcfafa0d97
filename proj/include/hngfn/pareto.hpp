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

#ifndef HNGFN_PARETO_HPP_
#define HNGFN_PARETO_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hngfn/error.hpp"
#include "hngfn/random.hpp"

namespace hngfn {

using ObjectiveVector = Eigen::VectorXd;

inline std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream s;
  s << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  s << ")";
  return s.str();
}

/// A point on the probability simplex weighting M objectives.
class PreferenceVector {
 public:
  static constexpr double kTolerance = 1e-9;

  PreferenceVector() = default;
  explicit PreferenceVector(Eigen::VectorXd weights)
      : weights_(std::move(weights)) {
    if (weights_.size() == 0) {
      throw ContractViolation("preference vector must be non-empty");
    }
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] >= 0.0)) {
        throw ContractViolation("preference weights must be non-negative: " +
                                format_vector(weights_));
      }
    }
    if (std::abs(weights_.sum() - 1.0) > kTolerance) {
      throw ContractViolation("preference weights must sum to 1: " +
                              format_vector(weights_));
    }
  }
  PreferenceVector(std::initializer_list<double> w)
      : PreferenceVector(Eigen::Map<const Eigen::VectorXd>(
            w.begin(), static_cast<Eigen::Index>(w.size()))) {}

  /// Rescales a non-negative, non-zero vector onto the simplex.
  static PreferenceVector normalized(const Eigen::VectorXd& raw) {
    const double s = raw.sum();
    if (!(s > 0.0)) throw ContractViolation("cannot normalize a zero vector");
    Eigen::VectorXd w = raw / s;
    w[w.size() - 1] = std::max(0.0, 1.0 - w.head(w.size() - 1).sum());
    return PreferenceVector(std::move(w));
  }

  static PreferenceVector vertex(int num_objectives, int m) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(num_objectives);
    w[m] = 1.0;
    return PreferenceVector(std::move(w));
  }

  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return weights_.size(); }
  double operator[](Eigen::Index i) const { return weights_[i]; }

  friend bool operator==(const PreferenceVector& a, const PreferenceVector& b) {
    return a.weights_ == b.weights_;
  }

 private:
  Eigen::VectorXd weights_;
};

namespace detail {
inline void check_lengths(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}
}  // namespace detail

/// a >= b in every component and a > b in at least one (maximization).
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  detail::check_lengths(a.size(), b.size(), "dominates");
  bool strict = false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

struct FrontMember {
  std::size_t id = 0;
  ObjectiveVector value;
};

struct ParetoFront {
  std::vector<FrontMember> members;
  ObjectiveVector reference;

  std::vector<ObjectiveVector> values() const {
    std::vector<ObjectiveVector> out;
    out.reserve(members.size());
    for (const auto& m : members) out.push_back(m.value);
    return out;
  }
  std::size_t size() const { return members.size(); }
};

/// Indices of the nondominated points, ascending. Of several identical
/// vectors only the first occurrence is kept.
inline std::vector<std::size_t> nondominated_indices(
    const std::vector<ObjectiveVector>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  // Lexicographically descending: any dominator of p is visited before p.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = points[a];
    const auto& pb = points[b];
    for (Eigen::Index i = 0; i < pa.size(); ++i) {
      if (pa[i] != pb[i]) return pa[i] > pb[i];
    }
    return false;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const auto& p = points[idx];
    bool drop = false;
    for (std::size_t k : kept) {
      if (dominates(points[k], p) || points[k] == p) {
        drop = true;
        break;
      }
    }
    if (!drop) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

inline ParetoFront pareto_front(const std::vector<ObjectiveVector>& points,
                                ObjectiveVector reference = {}) {
  ParetoFront front;
  for (std::size_t idx : nondominated_indices(points)) {
    front.members.push_back({idx, points[idx]});
  }
  if (reference.size() == 0 && !points.empty()) {
    reference = ObjectiveVector::Zero(points.front().size());
  }
  front.reference = std::move(reference);
  return front;
}

namespace detail {

// Points are shifted so the reference is the origin; all coordinates >= 0.
inline double hv2(std::vector<const double*> pts) {
  std::sort(pts.begin(), pts.end(), [](const double* a, const double* b) {
    if (a[0] != b[0]) return a[0] > b[0];
    return a[1] > b[1];
  });
  double vol = 0.0;
  double best_y = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    best_y = std::max(best_y, pts[i][1]);
    const double next_x = i + 1 < pts.size() ? pts[i + 1][0] : 0.0;
    vol += (pts[i][0] - next_x) * best_y;
  }
  return vol;
}

// Slab sweep on axis dims-1 (descending), recursing on the first dims-1 axes.
inline double hv_recursive(std::vector<const double*> pts, int dims) {
  if (pts.empty()) return 0.0;
  if (dims == 1) {
    double m = 0.0;
    for (const double* p : pts) m = std::max(m, p[0]);
    return m;
  }
  if (dims == 2) return hv2(std::move(pts));
  const int axis = dims - 1;
  std::sort(pts.begin(), pts.end(), [axis](const double* a, const double* b) {
    for (int i = axis; i >= 0; --i) {
      if (a[i] != b[i]) return a[i] > b[i];
    }
    return false;
  });
  double vol = 0.0;
  std::vector<const double*> prefix;
  prefix.reserve(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    prefix.push_back(pts[k]);
    const double z = pts[k][axis];
    const double z_next = k + 1 < pts.size() ? pts[k + 1][axis] : 0.0;
    if (z > z_next) vol += (z - z_next) * hv_recursive(prefix, dims - 1);
  }
  return vol;
}

}  // namespace detail

/// Exact Lebesgue measure of the union of boxes [r, y_i] for M <= 4.
inline double hypervolume(const std::vector<ObjectiveVector>& points,
                          const ObjectiveVector& reference) {
  if (points.empty()) return 0.0;
  const Eigen::Index m = reference.size();
  if (m < 1 || m > 4) {
    throw ContractViolation("exact hypervolume supports 1 to 4 objectives");
  }
  for (const auto& p : points) {
    detail::check_lengths(p.size(), m, "hypervolume");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (p[i] < reference[i]) {
        throw ContractViolation("hypervolume: point " + format_vector(p) +
                                " lies below the reference point " +
                                format_vector(reference));
      }
    }
  }
  std::vector<ObjectiveVector> shifted;
  for (std::size_t idx : nondominated_indices(points)) {
    shifted.push_back(points[idx] - reference);
  }
  std::vector<const double*> ptrs;
  for (const auto& p : shifted) ptrs.push_back(p.data());
  return detail::hv_recursive(std::move(ptrs), static_cast<int>(m));
}

inline double hypervolume(const ParetoFront& front) {
  return hypervolume(front.values(), front.reference);
}

enum class Scalarization { kWeightedSum, kTchebycheff };

inline double scalarize_ws(const PreferenceVector& lambda,
                           const ObjectiveVector& f) {
  detail::check_lengths(lambda.size(), f.size(), "scalarize_ws");
  return lambda.weights().dot(f);
}

// max_i lambda_i f_i, without a utopia point.
inline double scalarize_tch(const PreferenceVector& lambda,
                            const ObjectiveVector& f) {
  detail::check_lengths(lambda.size(), f.size(), "scalarize_tch");
  return lambda.weights().cwiseProduct(f).maxCoeff();
}

inline double scalarize(Scalarization kind, const PreferenceVector& lambda,
                        const ObjectiveVector& f) {
  return kind == Scalarization::kWeightedSum ? scalarize_ws(lambda, f)
                                             : scalarize_tch(lambda, f);
}

inline PreferenceVector sample_dirichlet(const Eigen::VectorXd& alpha, Rng& rng) {
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0)) {
      throw ContractViolation("Dirichlet concentration must be positive: " +
                              format_vector(alpha));
    }
  }
  Eigen::VectorXd g(alpha.size());
  do {
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
      g[i] = std::gamma_distribution<double>(alpha[i], 1.0)(rng);
    }
  } while (!(g.sum() > 0.0));
  return PreferenceVector::normalized(g);
}

/// 1 - sum(min) / sum(max) over two count vectors (multiset Jaccard).
/// Two empty multisets are identical (distance 0).
inline double jaccard_distance(const std::vector<int>& a,
                               const std::vector<int>& b) {
  detail::check_lengths(static_cast<Eigen::Index>(a.size()),
                        static_cast<Eigen::Index>(b.size()), "jaccard_distance");
  long inter = 0;
  long uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += std::min(a[i], b[i]);
    uni += std::max(a[i], b[i]);
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

/// Mean pairwise Jaccard distance between component multisets.
inline double diversity(const std::vector<std::vector<int>>& objects) {
  if (objects.size() < 2) {
    throw UndefinedMetric("diversity needs at least two objects");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      sum += jaccard_distance(objects[i], objects[j]);
    }
  }
  const double pairs = 0.5 * double(objects.size()) * double(objects.size() - 1);
  return sum / pairs;
}

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> fractional_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
inline double spearman(const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  detail::check_lengths(static_cast<Eigen::Index>(xs.size()),
                        static_cast<Eigen::Index>(ys.size()), "spearman");
  if (xs.size() < 3) throw UndefinedMetric("spearman needs at least 3 pairs");
  const auto rx = fractional_ranks(xs);
  const auto ry = fractional_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedMetric("spearman: zero rank variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace hngfn

#endif  // HNGFN_PARETO_HPP_
