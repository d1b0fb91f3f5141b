#pragma once

#include "afd/estimation.hpp"
#include "afd/model.hpp"
#include "afd/prior.hpp"
#include "afd/spectral.hpp"
#include "afd/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace afd {

/// Target functional mu(x, alpha, theta); the average effect is E[mu(X, A, theta0)].
struct EffectSpec {
  std::function<double(const OutcomeModel&, double, const Vector&)> mu;
  std::string name = "mu";
};

/// mu = F(theta + alpha) - F(alpha), the average partial effect of switching
/// the regressor from 0 to 1 in one period.
inline EffectSpec average_partial_effect() {
  return {[](const OutcomeModel& m, double alpha, const Vector& theta) {
            return m.error().cdf(theta(0) + alpha) - m.error().cdf(alpha);
          },
          "ape"};
}

inline EffectSpec constant_effect(double c) {
  return {[c](const OutcomeModel&, double, const Vector&) { return c; }, "constant"};
}

/// mu tabulated on the prior grid.
inline Vector effect_on_grid(const EffectSpec& effect, const OutcomeModel& model, const Vector& theta,
                             const AlphaGrid& grid) {
  Vector g(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    g(static_cast<Eigen::Index>(j)) = effect.mu(model, grid.points()[j], theta);
    if (!std::isfinite(g(static_cast<Eigen::Index>(j)))) {
      throw std::domain_error("effect functional is not finite on the alpha grid");
    }
  }
  return g;
}

struct EffectKernel {
  Vector w;
  std::string tag;
  double condition_number = std::numeric_limits<double>::quiet_NaN();
  bool conditioning_warning = false;
};

/// w^(0)(y_(k)) = posterior mean of mu given y_(k).
inline EffectKernel baseline_effect_kernel(const SpectralQ& spec, const EffectSpec& effect,
                                           const OutcomeModel& model) {
  const Vector g = effect_on_grid(effect, model, spec.theta(), spec.table().prior());
  return {spec.table().posterior_times(g), "0"};
}

/// w^(q)' = W' sum_{r=0}^q (I - Q)^r.
inline EffectKernel effect_kernel_q(const EffectKernel& W, const SpectralQ& spec, int q) {
  if (q < 0) throw std::invalid_argument("effect_kernel_q: q must be nonnegative");
  if (q == 0) return W;
  return {spec.polynomial_apply_left(std::vector<double>(static_cast<std::size_t>(q) + 1, 1.0), W.w),
          std::to_string(q)};
}

/// w^(inf)' = W' Q^+, with eigenvalues below the threshold treated as zero.
inline EffectKernel effect_kernel_inf(const EffectKernel& W, const SpectralQ& spec, double threshold = 1e-9) {
  const Vector& lambda = spec.eigenvalues();
  Vector inv = Vector::Zero(lambda.size());
  double smallest_kept = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) >= threshold) {
      inv(i) = 1.0 / lambda(i);
      smallest_kept = std::min(smallest_kept, lambda(i));
    }
  }
  EffectKernel out{spec.from_symmetric(inv).transpose() * W.w, "inf"};
  out.condition_number = lambda(0) / smallest_kept;
  out.conditioning_warning = out.condition_number > 1e12;
  return out;
}

/// mu0 = E[mu(X, A, theta0)] by quadrature over pi0 and the design.
inline double population_effect(const EffectSpec& effect, const TruthSpec& truth) {
  truth.validate();
  const AlphaGrid& g = truth.pi0.grid();
  double total = 0.0;
  for (const auto& d : truth.design) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) s += g.weights()[j] * effect.mu(*d.model, g.points()[j], truth.theta0);
    total += d.weight * s;
  }
  return total / truth.total_weight();
}

/// Effect kernel for one covariate value at theta.
using EffectFamily = std::function<EffectKernel(const OutcomeModel&, const Vector&)>;

/// Standard family: w^(q) for q >= 0, w^(inf) for q < 0.
inline EffectFamily effect_family(EffectSpec effect, AlphaGrid prior, int q, double threshold = 1e-9,
                                  SpectralOptions options = {}) {
  return [=](const OutcomeModel& model, const Vector& theta) {
    const SpectralQ spec(model, theta, prior, options);
    const EffectKernel W = baseline_effect_kernel(spec, effect, model);
    return q < 0 ? effect_kernel_inf(W, spec, threshold) : effect_kernel_q(W, spec, q);
  };
}

/// E[w(Y, X, theta)] under the truth.
inline double population_effect_estimator_mean(const EffectFamily& family, const TruthSpec& truth,
                                               const Vector& theta) {
  const std::vector<Vector> probs = truth_probabilities(truth);
  double total = 0.0;
  for (std::size_t i = 0; i < truth.design.size(); ++i) {
    total += truth.design[i].weight * family(*truth.design[i].model, theta).w.dot(probs[i]);
  }
  return total / truth.total_weight();
}

struct SampleEffect {
  double mean = 0.0;
  double sd = 0.0;
};

/// mu-hat = (1/n) sum_i w(Y_i, X_i, theta-hat), with the sample sd of the terms.
inline SampleEffect estimator_effect(const Dataset& data, const EffectFamily& family, const Vector& theta_hat) {
  if (data.size() == 0) throw std::invalid_argument("estimator_effect: empty dataset");
  const auto counts = data.counts();
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t d = 0; d < data.designs.size(); ++d) {
    if (counts[d].sum() == 0.0) continue;
    const Vector w = family(*data.designs[d], theta_hat).w;
    s1 += w.dot(counts[d]);
    s2 += w.array().square().matrix().dot(counts[d]);
  }
  const double n = static_cast<double>(data.size());
  const double mean = s1 / n;
  return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean))};
}

}  // namespace afd
