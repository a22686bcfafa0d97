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

#ifndef HNGFN_SURROGATE_HPP_
#define HNGFN_SURROGATE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "hngfn/checkpoint.hpp"
#include "hngfn/error.hpp"
#include "hngfn/nn.hpp"
#include "hngfn/pareto.hpp"
#include "hngfn/random.hpp"

namespace hngfn {

enum class SurrogateKind { kEvidential, kEnsemble };

inline const char* to_string(SurrogateKind k) {
  return k == SurrogateKind::kEvidential ? "evidential" : "ensemble";
}

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::kEvidential;
  int hidden = 64;
  int depth = 2;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_iterations = 10000;
  int patience = 500;
  // Validation loss is measured every `eval_every` iterations; patience is
  // counted in iterations.
  int eval_every = 25;
  double validation_fraction = 0.1;
  double dropout = 0.1;
  double weight_decay = 1e-6;
  double evidential_reg = 0.1;
  int ensemble_size = 5;
  std::size_t min_dataset = 20;

  void validate() const {
    if (hidden < 1 || depth < 1 || batch_size < 1 || max_iterations < 0 ||
        patience < 1 || eval_every < 1 || ensemble_size < 1) {
      throw ConfigError("surrogate sizes and counts must be positive");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw ConfigError("surrogate validation fraction must lie in (0, 1)");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("surrogate dropout must lie in [0, 1)");
    }
    if (!(learning_rate > 0.0) || weight_decay < 0.0 || evidential_reg < 0.0) {
      throw ConfigError("surrogate learning rate must be positive");
    }
  }
};

// Keeps nu, alpha - 1 and beta strictly positive even when softplus
// underflows.
inline constexpr double kMinEvidence = 1e-6;

inline double softplus(double z) {
  return z > 30.0 ? z : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Normal-Inverse-Gamma evidence for one objective.
struct NigParams {
  double gamma = 0.0;
  double nu = 1.0;
  double alpha = 2.0;
  double beta = 1.0;

  double epistemic_variance() const { return beta / (nu * (alpha - 1.0)); }
  double aleatoric_variance() const { return beta / (alpha - 1.0); }

  /// Maps raw network outputs (z_gamma, z_nu, z_alpha, z_beta).
  static NigParams from_raw(double zg, double zn, double za, double zb) {
    return {zg, softplus(zn) + kMinEvidence, softplus(za) + 1.0 + kMinEvidence,
            softplus(zb) + kMinEvidence};
  }
};

/// A scalar loss and its partial derivatives with respect to the evidence.
struct NigLoss {
  double value = 0.0;
  double d_gamma = 0.0;
  double d_nu = 0.0;
  double d_alpha = 0.0;
  double d_beta = 0.0;
};

/// Negative log-likelihood of y under the Student-t marginal of the NIG:
///   0.5 log(pi / nu) - alpha log(Omega) + (alpha + 0.5) log((y - gamma)^2 nu + Omega)
///   + lgamma(alpha) - lgamma(alpha + 0.5),   Omega = 2 beta (1 + nu).
inline NigLoss evidential_nll(double y, const NigParams& p) {
  const double d = y - p.gamma;
  const double omega = 2.0 * p.beta * (1.0 + p.nu);
  const double s = d * d * p.nu + omega;
  const double a = p.alpha;
  NigLoss l;
  l.value = 0.5 * std::log(M_PI / p.nu) - a * std::log(omega) + (a + 0.5) * std::log(s) +
            std::lgamma(a) - std::lgamma(a + 0.5);
  l.d_gamma = (a + 0.5) * (-2.0 * d * p.nu) / s;
  l.d_nu = -0.5 / p.nu - a * 2.0 * p.beta / omega + (a + 0.5) * (d * d + 2.0 * p.beta) / s;
  l.d_alpha = -std::log(omega) + std::log(s) + boost::math::digamma(a) -
              boost::math::digamma(a + 0.5);
  l.d_beta = -a / p.beta + (a + 0.5) * 2.0 * (1.0 + p.nu) / s;
  return l;
}

/// Evidence regularizer |y - gamma| (2 nu + alpha).
inline NigLoss evidential_regularizer(double y, const NigParams& p) {
  const double d = y - p.gamma;
  const double ad = std::abs(d);
  NigLoss l;
  l.value = ad * (2.0 * p.nu + p.alpha);
  l.d_gamma = d > 0.0 ? -(2.0 * p.nu + p.alpha) : (d < 0.0 ? 2.0 * p.nu + p.alpha : 0.0);
  l.d_nu = 2.0 * ad;
  l.d_alpha = ad;
  return l;
}

/// Per-objective predictive mean and standard deviation, one column per
/// input.
struct Posterior {
  nn::Matrix mean;
  nn::Matrix std;
};

struct FitReport {
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  int iterations = 0;       // summed over ensemble members
  int best_iteration = 0;   // of the last member
  double initial_validation_loss = 0.0;
  double validation_loss = 0.0;
  nn::Vector initial_validation_rmse;  // untrained network, per objective
  nn::Vector validation_rmse;          // per objective
};

/// Multi-objective regression surrogate with uncertainty: either one
/// evidential network with a NIG head per objective, or an ensemble of
/// independently initialized mean regressors.
class Surrogate {
 public:
  Surrogate(nn::Index input_size, int num_objectives, SurrogateConfig cfg)
      : cfg_(cfg), input_size_(input_size), m_(num_objectives) {
    cfg_.validate();
    if (input_size < 1 || num_objectives < 1) {
      throw DimensionError("surrogate needs positive input and output sizes");
    }
    std::vector<nn::Index> sizes{input_size};
    for (int i = 0; i < cfg_.depth; ++i) sizes.push_back(cfg_.hidden);
    sizes.push_back(evidential() ? 4 * m_ : m_);
    layout_ = nn::MlpLayout(sizes);
  }

  const SurrogateConfig& config() const { return cfg_; }
  bool evidential() const { return cfg_.kind == SurrogateKind::kEvidential; }
  bool fitted() const { return !members_.empty(); }
  int num_objectives() const { return m_; }
  nn::Index input_size() const { return input_size_; }
  const nn::MlpLayout& layout() const { return layout_; }
  const std::vector<nn::Vector>& members() const { return members_; }

  /// Fits on inputs `x` (features x n) and targets `y` (objectives x n).
  /// The network is re-initialized from `rng`.
  FitReport fit(const nn::Matrix& x, const nn::Matrix& y, Rng& rng) {
    if (x.cols() != y.cols() || x.rows() != input_size_ || y.rows() != m_) {
      throw DimensionError("surrogate fit: input/target shapes do not match");
    }
    const auto n = static_cast<std::size_t>(x.cols());
    if (n < cfg_.min_dataset) {
      throw SizeError("surrogate needs at least " + std::to_string(cfg_.min_dataset) +
                      " points, got " + std::to_string(n));
    }
    if (!y.allFinite() || !x.allFinite()) {
      throw NumericError("surrogate fit: non-finite inputs or targets");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(cfg_.validation_fraction * double(n))));
    const std::vector<std::size_t> val(order.begin(), order.begin() + long(n_val));
    const std::vector<std::size_t> train(order.begin() + long(n_val), order.end());

    FitReport report;
    report.train_size = train.size();
    report.validation_size = val.size();
    const nn::Matrix xv = gather(x, val);
    const nn::Matrix yv = gather(y, val);
    const int count = evidential() ? 1 : cfg_.ensemble_size;
    std::vector<nn::Vector> members;
    for (int e = 0; e < count; ++e) {
      Rng member_rng(rng());
      nn::Vector params = nn::he_uniform(layout_, member_rng);
      if (e == 0) {
        std::vector<nn::Vector> init{params};
        report.initial_validation_loss = loss(params, xv, yv, nullptr, nullptr);
        report.initial_validation_rmse = rmse(init, xv, yv);
      }
      train_member(params, x, y, train, xv, yv, member_rng, report);
      members.push_back(std::move(params));
    }
    members_ = std::move(members);
    report.validation_loss = 0.0;
    for (const auto& p : members_) report.validation_loss += loss(p, xv, yv, nullptr, nullptr);
    report.validation_loss /= double(members_.size());
    report.validation_rmse = rmse(members_, xv, yv);
    return report;
  }

  /// Transformed NIG evidence for every input (evidential surrogates only);
  /// result[m][i] belongs to objective m and column i.
  std::vector<std::vector<NigParams>> evidence(const nn::Matrix& x) const {
    require_fitted();
    if (!evidential()) throw StateError("evidence is only defined for evidential surrogates");
    return to_nig(nn::forward(layout_, members_.front(), x));
  }

  Posterior posterior(const nn::Matrix& x) const {
    require_fitted();
    if (x.rows() != input_size_) throw DimensionError("surrogate: input size mismatch");
    Posterior p;
    p.mean.resize(m_, x.cols());
    p.std.resize(m_, x.cols());
    if (evidential()) {
      const auto nig = to_nig(nn::forward(layout_, members_.front(), x));
      for (int m = 0; m < m_; ++m) {
        for (nn::Index i = 0; i < x.cols(); ++i) {
          const NigParams& q = nig[std::size_t(m)][std::size_t(i)];
          p.mean(m, i) = q.gamma;
          p.std(m, i) = std::sqrt(q.epistemic_variance());
        }
      }
      return p;
    }
    return ensemble_posterior(members_, x);
  }

  /// Mean and population standard deviation of member predictions.
  static Posterior ensemble_posterior(const std::vector<nn::Matrix>& predictions) {
    Posterior p;
    p.mean = nn::Matrix::Zero(predictions.front().rows(), predictions.front().cols());
    for (const auto& q : predictions) p.mean += q;
    p.mean /= double(predictions.size());
    p.std = nn::Matrix::Zero(p.mean.rows(), p.mean.cols());
    for (const auto& q : predictions) p.std.array() += (q - p.mean).array().square();
    p.std = (p.std / double(predictions.size())).cwiseSqrt();
    return p;
  }

  void save(nn::Checkpoint& c, const std::string& prefix) const {
    require_fitted();
    for (std::size_t e = 0; e < members_.size(); ++e) {
      c.add_mlp(prefix + ".member" + std::to_string(e), layout_, members_[e]);
    }
  }

  void load(const nn::Checkpoint& c, const std::string& prefix) {
    const int count = evidential() ? 1 : cfg_.ensemble_size;
    std::vector<nn::Vector> members;
    for (int e = 0; e < count; ++e) {
      members.push_back(c.read_mlp(prefix + ".member" + std::to_string(e), layout_));
    }
    members_ = std::move(members);
  }

  /// Training loss of `params` on (x, y) and, if `grad` is given, its
  /// gradient. Evidential: NLL + reg * regularizer summed over objectives;
  /// ensemble member: squared error summed over objectives. Both averaged
  /// over columns.
  double loss(const nn::Vector& params, const nn::Matrix& x, const nn::Matrix& y,
              nn::Vector* grad, const nn::Dropout* dropout) const {
    nn::ForwardCache cache;
    const nn::Matrix out =
        nn::forward(layout_, params, x, grad ? &cache : nullptr, dropout);
    const double n = double(x.cols());
    nn::Matrix d_out(out.rows(), out.cols());
    double total = 0.0;
    for (nn::Index i = 0; i < x.cols(); ++i) {
      for (int m = 0; m < m_; ++m) {
        if (!evidential()) {
          const double r = out(m, i) - y(m, i);
          total += r * r;
          d_out(m, i) = 2.0 * r / n;
          continue;
        }
        const nn::Index o = 4 * m;
        const NigParams q = NigParams::from_raw(out(o, i), out(o + 1, i), out(o + 2, i),
                                                out(o + 3, i));
        const NigLoss a = evidential_nll(y(m, i), q);
        const NigLoss b = evidential_regularizer(y(m, i), q);
        const double w = cfg_.evidential_reg;
        total += a.value + w * b.value;
        d_out(o, i) = (a.d_gamma + w * b.d_gamma) / n;
        d_out(o + 1, i) = (a.d_nu + w * b.d_nu) * sigmoid(out(o + 1, i)) / n;
        d_out(o + 2, i) = (a.d_alpha + w * b.d_alpha) * sigmoid(out(o + 2, i)) / n;
        d_out(o + 3, i) = (a.d_beta + w * b.d_beta) * sigmoid(out(o + 3, i)) / n;
      }
    }
    if (grad) {
      grad->setZero(params.size());
      nn::backward(layout_, params, cache, d_out, *grad);
    }
    return total / n;
  }

 private:
  void require_fitted() const {
    if (!fitted()) throw StateError("surrogate has not been fitted");
  }

  static nn::Matrix gather(const nn::Matrix& a, const std::vector<std::size_t>& idx) {
    nn::Matrix out(a.rows(), nn::Index(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(nn::Index(j)) = a.col(nn::Index(idx[j]));
    return out;
  }

  std::vector<std::vector<NigParams>> to_nig(const nn::Matrix& out) const {
    std::vector<std::vector<NigParams>> nig(static_cast<std::size_t>(m_));
    for (int m = 0; m < m_; ++m) {
      const nn::Index o = 4 * m;
      for (nn::Index i = 0; i < out.cols(); ++i) {
        nig[std::size_t(m)].push_back(
            NigParams::from_raw(out(o, i), out(o + 1, i), out(o + 2, i), out(o + 3, i)));
      }
    }
    return nig;
  }

  Posterior ensemble_posterior(const std::vector<nn::Vector>& members,
                               const nn::Matrix& x) const {
    std::vector<nn::Matrix> preds;
    for (const auto& p : members) preds.push_back(nn::forward(layout_, p, x));
    return ensemble_posterior(preds);
  }

  nn::Vector rmse(const std::vector<nn::Vector>& members, const nn::Matrix& x,
                  const nn::Matrix& y) const {
    nn::Matrix mean;
    if (evidential()) {
      const nn::Matrix out = nn::forward(layout_, members.front(), x);
      mean.resize(m_, x.cols());
      for (int m = 0; m < m_; ++m) mean.row(m) = out.row(4 * m);
    } else {
      mean = ensemble_posterior(members, x).mean;
    }
    return ((mean - y).array().square().rowwise().mean()).sqrt().matrix();
  }

  void train_member(nn::Vector& params, const nn::Matrix& x, const nn::Matrix& y,
                    const std::vector<std::size_t>& train, const nn::Matrix& xv,
                    const nn::Matrix& yv, Rng& rng, FitReport& report) const {
    nn::AdamState adam(params.size(), cfg_.learning_rate, cfg_.weight_decay);
    nn::Dropout dropout{cfg_.dropout, &rng};
    const std::size_t batch = std::min<std::size_t>(std::size_t(cfg_.batch_size), train.size());
    std::vector<std::size_t> perm = train;
    std::size_t cursor = perm.size();
    nn::Vector best = params;
    double best_loss = loss(params, xv, yv, nullptr, nullptr);
    int best_iter = 0;
    nn::Vector grad;
    int it = 0;
    for (; it < cfg_.max_iterations; ++it) {
      std::vector<std::size_t> idx;
      while (idx.size() < batch) {
        if (cursor == perm.size()) {
          std::shuffle(perm.begin(), perm.end(), rng);
          cursor = 0;
        }
        idx.push_back(perm[cursor++]);
      }
      loss(params, gather(x, idx), gather(y, idx), &grad,
           cfg_.dropout > 0.0 ? &dropout : nullptr);
      nn::adam_step(adam, params, grad);
      if ((it + 1) % cfg_.eval_every == 0) {
        const double v = loss(params, xv, yv, nullptr, nullptr);
        if (v < best_loss) {
          best_loss = v;
          best = params;
          best_iter = it + 1;
        } else if (it + 1 - best_iter >= cfg_.patience) {
          ++it;
          break;
        }
      }
    }
    params = std::move(best);
    report.iterations += it;
    report.best_iteration = best_iter;
  }

  SurrogateConfig cfg_;
  nn::Index input_size_;
  int m_;
  nn::MlpLayout layout_;
  std::vector<nn::Vector> members_;
};

struct AcquisitionConfig {
  Scalarization scalarization = Scalarization::kWeightedSum;
  double beta_ucb = 0.1;
  int mc_samples = 64;
};

/// UCB of the scalarized posterior. Weighted sum propagates independent
/// Gaussians in closed form; Tchebycheff scalarizes `mc_samples` posterior
/// draws and takes their mean and standard deviation. The standard-normal
/// draws are fixed at construction (common random numbers), so the value
/// is a deterministic function of (lambda, mean, std).
class UcbAcquisition {
 public:
  UcbAcquisition(AcquisitionConfig cfg, int num_objectives, Rng& rng) : cfg_(cfg) {
    if (cfg_.beta_ucb < 0.0) throw ConfigError("beta_ucb must be non-negative");
    if (cfg_.mc_samples < 2) throw ConfigError("Tchebycheff UCB needs at least 2 draws");
    std::normal_distribution<double> normal;
    z_.resize(num_objectives, cfg_.mc_samples);
    for (nn::Index j = 0; j < z_.cols(); ++j) {
      for (nn::Index m = 0; m < z_.rows(); ++m) z_(m, j) = normal(rng);
    }
  }

  const AcquisitionConfig& config() const { return cfg_; }
  const nn::Matrix& draws() const { return z_; }

  /// (mean, std) of the scalarized posterior.
  std::pair<double, double> scalarized(const PreferenceVector& lambda,
                                       const nn::ConstVecRef& mean,
                                       const nn::ConstVecRef& std) const {
    detail::check_lengths(lambda.size(), mean.size(), "acquisition");
    detail::check_lengths(std.size(), mean.size(), "acquisition");
    const auto& w = lambda.weights();
    if (cfg_.scalarization == Scalarization::kWeightedSum) {
      return {w.dot(mean), std::sqrt((w.array().square() * std.array().square()).sum())};
    }
    if (z_.rows() != mean.size()) throw DimensionError("acquisition: objective count mismatch");
    const nn::Index n = z_.cols();
    nn::Vector s(n);
    for (nn::Index j = 0; j < n; ++j) {
      s[j] = (w.array() * (mean.array() + std.array() * z_.col(j).array())).maxCoeff();
    }
    const double mu = s.mean();
    const double var = (s.array() - mu).square().sum() / double(n - 1);
    return {mu, std::sqrt(var)};
  }

  double operator()(const PreferenceVector& lambda, const nn::ConstVecRef& mean,
                    const nn::ConstVecRef& std) const {
    const auto [mu, sigma] = scalarized(lambda, mean, std);
    return mu + cfg_.beta_ucb * sigma;
  }

 private:
  AcquisitionConfig cfg_;
  nn::Matrix z_;
};

}  // namespace hngfn

#endif  // HNGFN_SURROGATE_HPP_
