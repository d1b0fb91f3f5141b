#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace afd {

namespace detail {

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x <= -37.0) return std::exp(x);
  if (x <= 18.0) return std::log1p(std::exp(x));
  if (x <= 33.3) return x + std::exp(-x);
  return x;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Asymptotic series 1 - 1/u^2 + 3/u^4 - 15/u^6 + 105/u^8 for the normal
// lower tail, valid for u << 0.
inline double normal_tail_series(double u) {
  const double r = 1.0 / (u * u);
  return 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
}

inline constexpr double kNormalTailSwitch = -30.0;

inline double normal_log_pdf(double u) { return -0.5 * u * u - kLogSqrt2Pi; }

inline double normal_log_cdf(double u) {
  if (u > 0.0) return std::log1p(-0.5 * std::erfc(u / kSqrt2));
  if (u > kNormalTailSwitch) return std::log(0.5 * std::erfc(-u / kSqrt2));
  return normal_log_pdf(u) - std::log(-u) + std::log(normal_tail_series(u));
}

// phi(u) / Phi(u)
inline double normal_inverse_mills(double u) {
  if (u > kNormalTailSwitch) {
    return std::exp(normal_log_pdf(u)) / (0.5 * std::erfc(-u / kSqrt2));
  }
  return -u / normal_tail_series(u);
}

}  // namespace detail

/// Distribution of the idiosyncratic errors U_it of a single-index binary
/// choice model, Y_it = 1(index + alpha >= U_it), so Pr(Y_it = 1) = F(index + alpha).
///
/// Every quantity that can underflow has a log-space or ratio counterpart:
/// log_cdf/log_sf for likelihoods, pdf_over_cdf/pdf_over_sf for scores.
class ErrorDistribution {
 public:
  enum class Kind { standard_normal, logistic_unit, logistic_standardized, laplace };

  constexpr explicit ErrorDistribution(Kind kind = Kind::standard_normal) : kind_(kind) {}

  static ErrorDistribution probit() { return ErrorDistribution(Kind::standard_normal); }
  static ErrorDistribution logit() { return ErrorDistribution(Kind::logistic_unit); }
  static ErrorDistribution logit_std() { return ErrorDistribution(Kind::logistic_standardized); }
  static ErrorDistribution laplace() { return ErrorDistribution(Kind::laplace); }

  /// Parses the configuration names "probit", "logit", "logit_std", "laplace".
  static ErrorDistribution from_name(std::string_view name) {
    if (name == "probit") return probit();
    if (name == "logit") return logit();
    if (name == "logit_std") return logit_std();
    if (name == "laplace") return laplace();
    throw std::invalid_argument("unknown error distribution '" + std::string(name) + "'");
  }

  constexpr Kind kind() const noexcept { return kind_; }

  std::string name() const {
    switch (kind_) {
      case Kind::standard_normal: return "probit";
      case Kind::logistic_unit: return "logit";
      case Kind::logistic_standardized: return "logit_std";
      case Kind::laplace: return "laplace";
    }
    return "?";
  }

  double cdf(double u) const {
    switch (kind_) {
      case Kind::standard_normal: return 0.5 * std::erfc(-u / detail::kSqrt2);
      case Kind::logistic_unit:
      case Kind::logistic_standardized: return detail::sigmoid(logistic_scale() * u);
      case Kind::laplace: return u < 0.0 ? 0.5 * std::exp(u) : 1.0 - 0.5 * std::exp(-u);
    }
    return 0.0;
  }

  /// 1 - F(u), computed without cancellation.
  double sf(double u) const {
    if (kind_ == Kind::standard_normal) return 0.5 * std::erfc(u / detail::kSqrt2);
    if (kind_ == Kind::laplace) return u > 0.0 ? 0.5 * std::exp(-u) : 1.0 - 0.5 * std::exp(u);
    return detail::sigmoid(-logistic_scale() * u);
  }

  double pdf(double u) const {
    switch (kind_) {
      case Kind::standard_normal: return std::exp(detail::normal_log_pdf(u));
      case Kind::logistic_unit:
      case Kind::logistic_standardized: {
        const double s = logistic_scale();
        return s * detail::sigmoid(s * u) * detail::sigmoid(-s * u);
      }
      case Kind::laplace: return 0.5 * std::exp(-std::abs(u));
    }
    return 0.0;
  }

  double log_cdf(double u) const {
    switch (kind_) {
      case Kind::standard_normal: return detail::normal_log_cdf(u);
      case Kind::logistic_unit:
      case Kind::logistic_standardized: return -detail::softplus(-logistic_scale() * u);
      case Kind::laplace: return u < 0.0 ? u - std::numbers::ln2 : std::log1p(-0.5 * std::exp(-u));
    }
    return 0.0;
  }

  double log_sf(double u) const {
    switch (kind_) {
      case Kind::standard_normal: return detail::normal_log_cdf(-u);
      case Kind::logistic_unit:
      case Kind::logistic_standardized: return -detail::softplus(logistic_scale() * u);
      case Kind::laplace: return u > 0.0 ? -u - std::numbers::ln2 : std::log1p(-0.5 * std::exp(u));
    }
    return 0.0;
  }

  /// d/du log F(u) = f(u)/F(u).
  double pdf_over_cdf(double u) const {
    switch (kind_) {
      case Kind::standard_normal: return detail::normal_inverse_mills(u);
      case Kind::logistic_unit:
      case Kind::logistic_standardized: {
        const double s = logistic_scale();
        return s * detail::sigmoid(-s * u);
      }
      case Kind::laplace: return u < 0.0 ? 1.0 : 0.5 * std::exp(-u) / (1.0 - 0.5 * std::exp(-u));
    }
    return 0.0;
  }

  /// -d/du log(1 - F(u)) = f(u)/(1 - F(u)).
  double pdf_over_sf(double u) const {
    switch (kind_) {
      case Kind::standard_normal: return detail::normal_inverse_mills(-u);
      case Kind::logistic_unit:
      case Kind::logistic_standardized: {
        const double s = logistic_scale();
        return s * detail::sigmoid(s * u);
      }
      case Kind::laplace: return u > 0.0 ? 1.0 : 0.5 * std::exp(u) / (1.0 - 0.5 * std::exp(u));
    }
    return 0.0;
  }

  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0,1)");
    switch (kind_) {
      case Kind::standard_normal: return -detail::kSqrt2 * boost::math::erfc_inv(2.0 * p);
      case Kind::logistic_unit:
      case Kind::logistic_standardized: return std::log(p / (1.0 - p)) / logistic_scale();
      case Kind::laplace: return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
    }
    return 0.0;
  }

  /// True when the distribution is symmetric about zero (all supported kinds are).
  constexpr bool symmetric() const noexcept { return true; }

 private:
  constexpr double logistic_scale() const noexcept {
    // Variance-one logistic: F(u) = 1 / (1 + exp(-pi u / sqrt(3))).
    return kind_ == Kind::logistic_standardized ? std::numbers::pi / std::numbers::sqrt3 : 1.0;
  }

  Kind kind_;
};

}  // namespace afd
