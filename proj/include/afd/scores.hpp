#pragma once

#include "afd/errors.hpp"
#include "afd/likelihood.hpp"
#include "afd/model.hpp"
#include "afd/prior.hpp"
#include "afd/roots.hpp"
#include "afd/spectral.hpp"
#include "afd/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace afd {

struct KernelDiagnostics {
  /// Ratio between the smallest retained and the largest discarded eigenvalue
  /// of a spectral projection (infinite when not applicable).
  double eigengap_ratio = std::numeric_limits<double>::infinity();
  bool eigengap_warning = false;
  /// Outcomes whose alpha-hat sits at an end of the search grid.
  std::vector<std::size_t> boundary_outcomes;
  std::vector<std::string> messages;
};

/// Moment function in matrix form: m(y_(k), x, theta) = S.col(k).
struct MomentKernel {
  Matrix S;
  std::string tag;
  KernelDiagnostics diagnostics;

  Eigen::Index dim() const { return S.rows(); }
  Eigen::Index outcome_count() const { return S.cols(); }
  Vector moment(std::size_t k) const { return S.col(static_cast<Eigen::Index>(k)); }
};

/// Column k = d/dtheta log p_prior(y_(k) | x, theta), the posterior-weighted score.
inline MomentKernel integrated_score(const SpectralQ& spec) {
  return {spec.table().integrated_score(), "integrated", {}};
}

inline MomentKernel integrated_score(const OutcomeModel& model, const Vector& theta, const AlphaGrid& prior) {
  return integrated_score(SpectralQ(model, theta, prior));
}

/// Default alpha search grid for fixed-theta MLEs: -10..10 in steps of 0.1.
inline std::vector<double> default_alpha_search_grid() {
  std::vector<double> g(201);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -10.0 + 0.1 * static_cast<double>(i);
  return g;
}

struct AlphaHat {
  double alpha = 0.0;
  bool boundary = false;
};

/// argmax_alpha log f(y | x, alpha, theta) on the span of the search grid.
///
/// The supported likelihoods are log-concave in alpha, so the maximiser is
/// located by the sign change of the alpha-score between grid neighbours and
/// then solved to machine precision. The score is used instead of log f
/// because log F(u) rounds to exactly zero in the far tail, which makes the
/// likelihood look flat there. A score that never changes sign puts the
/// maximiser at a grid end, which is returned and flagged; ties resolve
/// toward smaller alpha.
inline AlphaHat mle_alpha(const OutcomeModel& model, const Outcome& y, const Vector& theta,
                          const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("mle_alpha: empty search grid");
  auto g = [&](double al) { return model.alpha_score(y, al, theta); };
  std::size_t i = 0;
  while (i < grid.size() && g(grid[i]) > 0.0) ++i;
  if (i == grid.size()) return {grid.back(), true};
  if (i == 0) return {grid.front(), g(grid[0]) < 0.0};
  if (g(grid[i]) == 0.0) return {grid[i], false};
  return {find_root(g, grid[i - 1], grid[i], 1e-14, 200, "mle_alpha").root, false};
}

inline MomentKernel profile_score(const OutcomeModel& model, const Vector& theta,
                                  const std::vector<double>& grid = default_alpha_search_grid()) {
  MomentKernel K{Matrix(model.theta_dim(), static_cast<Eigen::Index>(model.outcome_count())), "profile", {}};
  for (std::size_t k = 0; k < model.outcome_count(); ++k) {
    const Outcome y = model.outcome(k);
    const AlphaHat ah = mle_alpha(model, y, theta, grid);
    if (ah.boundary) K.diagnostics.boundary_outcomes.push_back(k);
    K.S.col(static_cast<Eigen::Index>(k)) = model.score(y, ah.alpha, theta);
  }
  return K;
}

namespace detail {

// S (I - Q)^q by repeated right multiplication.
inline Matrix right_multiply_power(const Matrix& S, const SpectralQ& spec, int q) {
  Matrix K = S;
  if (q <= 0) return K;
  const bool use_dense_q = spec.dense() && spec.outcome_count() <= spec.table().grid_size();
  for (int i = 0; i < q; ++i) {
    if (use_dense_q) {
      K -= K * spec.q();
    } else {
      K -= spec.apply_left(K);
    }
  }
  return K;
}

}  // namespace detail

/// S_eff = S (I - Q)^q.
inline MomentKernel corrected_score(const MomentKernel& raw, const SpectralQ& spec, int q) {
  if (q < 0) throw std::invalid_argument("corrected_score: q must be nonnegative");
  if (q == 0) return raw;
  MomentKernel K = raw;
  K.S = detail::right_multiply_power(raw.S, spec, q);
  K.tag = raw.tag + "+q" + std::to_string(q);
  return K;
}

struct LimitOptions {
  /// Project onto eigenvectors with lambda < threshold ...
  double threshold = 1e-9;
  /// ... or, when positive, onto the smallest_k eigenvectors.
  int smallest_k = 0;
};

/// S h_inf(Q) with h_inf the indicator of the selected (near-)zero eigenvalues.
inline MomentKernel limit_score(const MomentKernel& raw, const SpectralQ& spec, LimitOptions opts = {}) {
  const Vector& lambda = spec.eigenvalues();
  const auto n = lambda.size();
  Vector ind = Vector::Zero(n);
  Eigen::Index selected = 0;
  if (opts.smallest_k > 0) {
    selected = std::min<Eigen::Index>(opts.smallest_k, n);
  } else {
    selected = static_cast<Eigen::Index>((lambda.array() < opts.threshold).count());
  }
  ind.tail(selected).setOnes();
  MomentKernel K = raw;
  K.tag = raw.tag + "+inf";
  if (selected == 0) {
    K.S.setZero();
    K.diagnostics.messages.push_back("no eigenvalue selected; limit kernel is zero");
    return K;
  }
  if (selected < n) {
    const double kept = lambda(n - selected - 1);
    const double dropped = lambda(n - selected);
    K.diagnostics.eigengap_ratio = dropped > 0.0 ? kept / dropped : std::numeric_limits<double>::infinity();
    if (K.diagnostics.eigengap_ratio < 10.0) {
      K.diagnostics.eigengap_warning = true;
      std::ostringstream os;
      os << "eigengap warning: eigenvalues " << kept << " and " << dropped
         << " on either side of the cut differ by less than a factor 10";
      K.diagnostics.messages.push_back(os.str());
    }
  }
  K.S = raw.S * spec.from_symmetric(ind);
  return K;
}

/// S h(Q).
inline MomentKernel stem_score(const MomentKernel& raw, const SpectralQ& spec,
                               const std::function<double(double)>& h, std::string tag = "stem") {
  MomentKernel K = raw;
  K.S = raw.S * spec.stem_apply(h);
  K.tag = raw.tag + "+" + tag;
  return K;
}

inline std::function<double(double)> power_stem(int q) {
  return [q](double lambda) { return std::pow(1.0 - lambda, q); };
}

/// exp(-lambda / c).
inline std::function<double(double)> soft_threshold_stem(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("soft threshold: c must be positive");
  return [c](double lambda) { return std::exp(-lambda / c); };
}

/// Q-tilde[k][l] = f(y_(k) | x, alpha-hat(y_(l)), theta), the predictive matrix
/// that plugs in the fixed-theta MLE instead of averaging over a prior.
struct QTilde {
  Matrix q;
  std::vector<AlphaHat> alpha_hat;

  /// Eigenvalues of the (nonsymmetric) matrix, sorted by modulus descending.
  Eigen::VectorXcd eigenvalues() const {
    Eigen::EigenSolver<Matrix> es(q, false);
    Eigen::VectorXcd ev = es.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size(),
              [](const auto& a, const auto& b) { return std::abs(a) > std::abs(b); });
    return ev;
  }

  /// n_Y minus the numerical rank: a lower bound on the number of zero eigenvalues.
  std::size_t null_dimension(double tol = 1e-10) const {
    Eigen::JacobiSVD<Matrix> svd(q);
    const Vector& s = svd.singularValues();
    return static_cast<std::size_t>((s.array() < tol * std::max(1.0, s(0))).count());
  }
};

inline QTilde build_q_tilde(const OutcomeModel& model, const Vector& theta,
                            const std::vector<double>& grid = default_alpha_search_grid()) {
  const auto n = model.outcome_count();
  QTilde out;
  out.q.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.alpha_hat.reserve(n);
  for (std::size_t l = 0; l < n; ++l) {
    out.alpha_hat.push_back(mle_alpha(model, model.outcome(l), theta, grid));
    out.q.col(static_cast<Eigen::Index>(l)) = outcome_probabilities(model, theta, out.alpha_hat.back().alpha);
  }
  return out;
}

/// S (I - Q-tilde)^q.
inline MomentKernel corrected_score(const MomentKernel& raw, const QTilde& qt, int q) {
  MomentKernel K = raw;
  for (int i = 0; i < q; ++i) K.S -= K.S * qt.q;
  K.tag = raw.tag + "+qtilde" + std::to_string(q);
  return K;
}

/// Exact moment for the unit-scale logit two-block model:
/// m(y) = 1{y = ybar} - r(theta) 1{y = ytilde}, with
/// r = C(T0,ybar0) C(T1,ybar1) / (C(T0,yt0) C(T1,yt1)) * exp((ybar1 - yt1) theta).
inline MomentKernel logit_exact_moment(int T0, int T1, const Outcome& ybar, const Outcome& ytilde,
                                       double theta) {
  const TwoBlockBinomialModel model(T0, T1, ErrorDistribution::logit());
  const std::size_t kb = model.index_of(ybar);
  const std::size_t kt = model.index_of(ytilde);
  if (ybar[0] + ybar[1] != ytilde[0] + ytilde[1]) {
    throw std::domain_error("logit_exact_moment: outcomes must have equal total counts");
  }
  if (kb == kt) throw std::domain_error("logit_exact_moment: outcomes must differ");
  const double log_r = detail::log_binomial_coefficient(T0, ybar[0]) + detail::log_binomial_coefficient(T1, ybar[1]) -
                       detail::log_binomial_coefficient(T0, ytilde[0]) -
                       detail::log_binomial_coefficient(T1, ytilde[1]) + (ybar[1] - ytilde[1]) * theta;
  MomentKernel K{Matrix::Zero(1, static_cast<Eigen::Index>(model.outcome_count())), "logit_exact", {}};
  K.S(0, static_cast<Eigen::Index>(kb)) = 1.0;
  K.S(0, static_cast<Eigen::Index>(kt)) = -std::exp(log_r);
  return K;
}

/// E[m(Y, x, theta) | alpha] = sum_k S_eff[:,k] f(y_(k) | x, alpha, theta).
inline Vector conditional_bias(const MomentKernel& kernel, const OutcomeModel& model, const Vector& theta,
                               double alpha) {
  return kernel.S * outcome_probabilities(model, theta, alpha);
}

/// Kernel recipe; `limit` selects q = infinity and then q is ignored.
struct KernelSpec {
  enum class Initial { integrated, profile };
  enum class Stem { power, softexp };

  Initial initial = Initial::integrated;
  Stem stem = Stem::power;
  int q = 0;
  bool limit = false;
  LimitOptions limit_options{1e-9, 1};
  double c = 1e-6;
  bool alternative_q_tilde = false;
  std::vector<double> alpha_search = default_alpha_search_grid();
  SpectralOptions spectral;

  std::string label() const {
    if (stem == Stem::softexp) {
      std::ostringstream os;
      os << "softexp(c=" << c << ")";
      return os.str();
    }
    return limit ? std::string("inf") : std::to_string(q);
  }
};

inline MomentKernel make_kernel(const OutcomeModel& model, const Vector& theta, const AlphaGrid& prior,
                                const KernelSpec& ks) {
  MomentKernel raw;
  if (ks.initial == KernelSpec::Initial::profile) raw = profile_score(model, theta, ks.alpha_search);
  if (ks.alternative_q_tilde) {
    if (raw.S.size() == 0) raw = integrated_score(model, theta, prior);
    return corrected_score(raw, build_q_tilde(model, theta, ks.alpha_search), ks.q);
  }
  const SpectralQ spec(model, theta, prior, ks.spectral);
  if (raw.S.size() == 0) raw = integrated_score(spec);
  if (ks.stem == KernelSpec::Stem::softexp) return stem_score(raw, spec, soft_threshold_stem(ks.c), "softexp");
  if (ks.limit) return limit_score(raw, spec, ks.limit_options);
  return corrected_score(raw, spec, ks.q);
}

/// theta -> kernel for one covariate value.
using KernelFamily = std::function<MomentKernel(const OutcomeModel&, const Vector&)>;

inline KernelFamily kernel_family(KernelSpec ks, AlphaGrid prior) {
  return [ks = std::move(ks), prior = std::move(prior)](const OutcomeModel& model, const Vector& theta) {
    return make_kernel(model, theta, prior, ks);
  };
}

}  // namespace afd
