#pragma once

#include "afd/distributions.hpp"
#include "afd/errors.hpp"
#include "afd/likelihood.hpp"
#include "afd/model.hpp"
#include "afd/parallel.hpp"
#include "afd/prior.hpp"
#include "afd/roots.hpp"
#include "afd/scores.hpp"
#include "afd/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace afd {

/// A covariate value with its design weight.
struct DesignPoint {
  ModelPtr model;
  double weight = 1.0;
};

/// True data-generating process: theta0, heterogeneity distribution pi0 and
/// the covariate design (weights are normalised on use).
struct TruthSpec {
  Vector theta0;
  AlphaDistribution pi0 = AlphaDistribution::point(0.0);
  std::vector<DesignPoint> design;

  double total_weight() const {
    double w = 0.0;
    for (const auto& d : design) w += d.weight;
    return w;
  }

  void validate() const {
    if (design.empty()) throw std::invalid_argument("TruthSpec: empty design");
    if (!theta0.allFinite()) throw std::invalid_argument("TruthSpec: theta0 must be finite");
    for (const auto& d : design) {
      if (!d.model) throw std::invalid_argument("TruthSpec: null model in design");
      if (!(d.weight > 0.0)) throw std::invalid_argument("TruthSpec: design weights must be positive");
    }
  }
};

/// Outcome probabilities Pr(y_(k) | x; theta0, pi0) for each design point.
inline std::vector<Vector> truth_probabilities(const TruthSpec& truth) {
  truth.validate();
  std::vector<Vector> out(truth.design.size());
  for (std::size_t i = 0; i < truth.design.size(); ++i) {
    out[i] = mixture_probabilities(*truth.design[i].model, truth.theta0, truth.pi0.grid());
  }
  return out;
}

/// Population moment and second moment of a kernel family under the truth.
/// Holds the truth probabilities so repeated evaluations in theta reuse them.
class PopulationMoments {
 public:
  PopulationMoments(KernelFamily family, TruthSpec truth)
      : family_(std::move(family)), truth_(std::move(truth)), probs_(truth_probabilities(truth_)) {
    total_ = truth_.total_weight();
  }

  const TruthSpec& truth() const noexcept { return truth_; }

  /// E[m(Y, X, theta)], exact summation over outcomes, averaged over the design.
  Vector mean(const Vector& theta) const { return moments(theta).first; }

  /// (E[m], E[m m']).
  std::pair<Vector, Matrix> moments(const Vector& theta) const {
    const std::size_t nd = truth_.design.size();
    std::vector<Vector> m1(nd);
    std::vector<Matrix> m2(nd);
    parallel_chunks(nd, [&](std::size_t i) {
      const MomentKernel K = family_(*truth_.design[i].model, theta);
      const double w = truth_.design[i].weight / total_;
      m1[i] = w * (K.S * probs_[i]);
      m2[i] = w * (K.S * probs_[i].asDiagonal() * K.S.transpose());
    });
    Vector s1 = m1[0];
    Matrix s2 = m2[0];
    for (std::size_t i = 1; i < nd; ++i) {
      s1 += m1[i];
      s2 += m2[i];
    }
    return {s1, s2};
  }

 private:
  KernelFamily family_;
  TruthSpec truth_;
  std::vector<Vector> probs_;
  double total_ = 1.0;
};

struct EstimationDiagnostics {
  std::uintmax_t solver_iterations = 0;
  bool eigengap_warning = false;
  std::vector<std::string> messages;
};

struct EstimationReport {
  std::string q;
  double theta = 0.0;  // theta_star or theta_hat
  double bias = 0.0;
  double V = 0.0;
  double rmse = 0.0;
  double ci95 = 0.0;
  EstimationDiagnostics diagnostics;
};

struct RootOptions {
  double lo = -1.0;
  double hi = 4.0;
  double x_tol = 1e-10;
};

/// Scalar pseudo-true value: root of the population moment on [lo, hi].
inline std::pair<double, std::uintmax_t> pseudo_true(const PopulationMoments& pop, RootOptions opts) {
  if (pop.truth().theta0.size() != 1) {
    throw UnsupportedOperation("pseudo_true: only scalar theta is supported");
  }
  const auto res = find_root([&](double t) { return pop.mean(scalar_theta(t))(0); }, opts.lo, opts.hi,
                             opts.x_tol, 200, "pseudo_true");
  return {res.root, res.iterations};
}

/// Central difference d/dtheta of a scalar moment.
template <class Fn>
double moment_jacobian(Fn&& mean, double theta, double step = 1e-5) {
  return (mean(theta + step) - mean(theta - step)) / (2.0 * step);
}

/// V* = Var[m] / G^2 at theta* (scalar sandwich).
inline double asymptotic_variance(const PopulationMoments& pop, double theta_star, double step = 1e-5) {
  const double G = moment_jacobian([&](double t) { return pop.mean(scalar_theta(t))(0); }, theta_star, step);
  if (!(std::abs(G) >= 1e-12)) {
    std::ostringstream os;
    os << "asymptotic_variance: moment Jacobian " << G << " is numerically zero";
    throw SingularJacobianError(os.str());
  }
  const auto [m1, m2] = pop.moments(scalar_theta(theta_star));
  const double var = m2(0, 0) - m1(0) * m1(0);
  return var / (G * G);
}

/// rmse = sqrt(V/n + bias^2); ci95 = Pr(|Z| <= z_.975) for Z ~ N(bias / sqrt(V/n), 1).
inline std::pair<double, double> rmse_coverage(double bias, double V, double n) {
  if (!(V > 0.0)) throw std::domain_error("rmse_coverage: V must be positive");
  if (!(n >= 1.0)) throw std::domain_error("rmse_coverage: n must be at least 1");
  const ErrorDistribution normal = ErrorDistribution::probit();
  const double se = std::sqrt(V / n);
  const double z = normal.quantile(0.975);
  const double mu = bias / se;
  const double ci = normal.cdf(z - mu) - normal.cdf(-z - mu);
  return {std::sqrt(V / n + bias * bias), ci};
}

/// Pseudo-true value, asymptotic variance and the closed-form RMSE/coverage
/// for a sample of n units.
inline EstimationReport population_report(const PopulationMoments& pop, RootOptions opts, double n,
                                          std::string label) {
  EstimationReport r;
  r.q = std::move(label);
  const auto [ts, iters] = pseudo_true(pop, opts);
  r.theta = ts;
  r.bias = ts - pop.truth().theta0(0);
  r.V = asymptotic_variance(pop, ts);
  std::tie(r.rmse, r.ci95) = rmse_coverage(r.bias, r.V, n);
  r.diagnostics.solver_iterations = iters;
  return r;
}

/// Observed panel: design points plus per-unit (design index, outcome index).
struct Dataset {
  std::vector<ModelPtr> designs;
  std::vector<std::size_t> unit_design;
  std::vector<std::size_t> unit_outcome;

  std::size_t size() const { return unit_design.size(); }

  /// Outcome counts per design point.
  std::vector<Vector> counts() const {
    std::vector<Vector> c(designs.size());
    for (std::size_t d = 0; d < designs.size(); ++d) {
      c[d] = Vector::Zero(static_cast<Eigen::Index>(designs[d]->outcome_count()));
    }
    for (std::size_t i = 0; i < size(); ++i) c[unit_design[i]](static_cast<Eigen::Index>(unit_outcome[i])) += 1.0;
    return c;
  }
};

/// Sample moments of a kernel family on a dataset.
class SampleMoments {
 public:
  SampleMoments(KernelFamily family, const Dataset& data)
      : family_(std::move(family)), designs_(data.designs), counts_(data.counts()), n_(static_cast<double>(data.size())) {
    if (data.size() == 0) throw std::invalid_argument("SampleMoments: empty dataset");
    for (std::size_t d = 0; d < designs_.size(); ++d) {
      if (counts_[d].sum() > 0.0) active_.push_back(d);
    }
  }

  double n() const noexcept { return n_; }

  std::pair<Vector, Matrix> moments(const Vector& theta) const {
    std::vector<Vector> m1(active_.size());
    std::vector<Matrix> m2(active_.size());
    parallel_chunks(active_.size(), [&](std::size_t a) {
      const std::size_t d = active_[a];
      const MomentKernel K = family_(*designs_[d], theta);
      m1[a] = K.S * counts_[d] / n_;
      m2[a] = K.S * counts_[d].asDiagonal() * K.S.transpose() / n_;
    });
    Vector s1 = m1[0];
    Matrix s2 = m2[0];
    for (std::size_t a = 1; a < active_.size(); ++a) {
      s1 += m1[a];
      s2 += m2[a];
    }
    return {s1, s2};
  }

  Vector mean(const Vector& theta) const { return moments(theta).first; }

 private:
  KernelFamily family_;
  std::vector<ModelPtr> designs_;
  std::vector<Vector> counts_;
  std::vector<std::size_t> active_;
  double n_;
};

/// Method-of-moments estimate: root of the sample moment over the bracket.
inline std::pair<double, std::uintmax_t> mm_estimate(const SampleMoments& sample, RootOptions opts) {
  const auto res = find_root([&](double t) { return sample.mean(scalar_theta(t))(0); }, opts.lo, opts.hi,
                             opts.x_tol, 200, "mm_estimate");
  return {res.root, res.iterations};
}

/// V-hat = sample Var[m] / G-hat^2 at theta-hat.
inline double sandwich_variance(const SampleMoments& sample, double theta_hat, double step = 1e-5) {
  const auto [m1, m2] = sample.moments(scalar_theta(theta_hat));
  const double var = m2(0, 0) - m1(0) * m1(0);
  if (!(var > 0.0)) throw NumericalError("sandwich_variance: sample moment has zero variance");
  const double G = moment_jacobian([&](double t) { return sample.mean(scalar_theta(t))(0); }, theta_hat, step);
  if (!(std::abs(G) >= 1e-12)) throw SingularJacobianError("sandwich_variance: sample Jacobian is numerically zero");
  return var / (G * G);
}

/// theta-hat -/+ z_.975 sqrt(V-hat / n).
inline std::pair<double, double> confidence_interval(double theta_hat, double V_hat, double n) {
  const double half = ErrorDistribution::probit().quantile(0.975) * std::sqrt(V_hat / n);
  return {theta_hat - half, theta_hat + half};
}

}  // namespace afd
