#pragma once

#include "afd/distributions.hpp"
#include "afd/types.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace afd {

/// Likelihood of one block of the outcome on a grid of alpha values.
///
/// The likelihood of every supported model factorises over blocks:
/// f(y | x, alpha, theta) = prod_b f_b(y_b | x, alpha, theta), where y_b is
/// the b-th digit of the outcome. Tables are levels x M, row-major so a level
/// is contiguous over the alpha grid.
struct FactorBlock {
  RowMatrix log_f;
  RowMatrix f;
  /// One table per parameter component: d/dtheta_d log f_b.
  std::vector<RowMatrix> score;
};

/// Conditional outcome model f(y | x, alpha, theta) for one fixed covariate
/// value x. Outcomes are indexed k = 0..n_Y-1 in mixed-radix order of their
/// block digits, first block most significant.
///
/// Instances are immutable and may be shared across threads.
class OutcomeModel {
 public:
  virtual ~OutcomeModel() = default;

  std::size_t outcome_count() const noexcept { return n_outcomes_; }
  const std::vector<int>& radices() const noexcept { return radices_; }
  std::size_t block_count() const noexcept { return radices_.size(); }
  const ErrorDistribution& error() const noexcept { return error_; }

  Outcome outcome(std::size_t k) const {
    if (k >= n_outcomes_) throw std::domain_error("outcome index out of range");
    Outcome y(radices_.size());
    for (std::size_t b = radices_.size(); b-- > 0;) {
      y[b] = static_cast<int>(k % static_cast<std::size_t>(radices_[b]));
      k /= static_cast<std::size_t>(radices_[b]);
    }
    return y;
  }

  std::size_t index_of(const Outcome& y) const {
    if (y.size() != radices_.size()) throw std::domain_error("outcome has wrong length");
    std::size_t k = 0;
    for (std::size_t b = 0; b < radices_.size(); ++b) {
      if (y[b] < 0 || y[b] >= radices_[b]) throw std::domain_error("outcome not in outcome space");
      k = k * static_cast<std::size_t>(radices_[b]) + static_cast<std::size_t>(y[b]);
    }
    return k;
  }

  std::vector<Outcome> enumerate_outcomes() const {
    std::vector<Outcome> out;
    out.reserve(n_outcomes_);
    for (std::size_t k = 0; k < n_outcomes_; ++k) out.push_back(outcome(k));
    return out;
  }

  virtual int theta_dim() const = 0;

  /// log f(y | x, alpha, theta).
  virtual double log_prob(const Outcome& y, double alpha, const Vector& theta) const = 0;

  /// Gradient of log f with respect to theta.
  virtual Vector score(const Outcome& y, double alpha, const Vector& theta) const = 0;

  /// d/dalpha log f; used to polish the fixed-theta MLE of alpha.
  virtual double alpha_score(const Outcome& y, double alpha, const Vector& theta) const = 0;

  /// Per-block likelihood and score tables on the given alpha points.
  virtual std::vector<FactorBlock> factor_blocks(std::span<const double> alphas,
                                                 const Vector& theta) const = 0;

  virtual Outcome simulate(double alpha, const Vector& theta, std::mt19937_64& rng) const = 0;

  virtual std::string describe() const = 0;

  double log_prob(std::size_t k, double alpha, const Vector& theta) const {
    return log_prob(outcome(k), alpha, theta);
  }

 protected:
  OutcomeModel(std::vector<int> radices, ErrorDistribution error)
      : radices_(std::move(radices)), error_(error) {
    n_outcomes_ = 1;
    for (int r : radices_) {
      if (r < 1) throw std::invalid_argument("OutcomeModel: block with no levels");
      n_outcomes_ *= static_cast<std::size_t>(r);
    }
  }

  void check_theta(const Vector& theta) const {
    if (theta.size() != theta_dim()) {
      std::ostringstream os;
      os << "theta has dimension " << theta.size() << ", model expects " << theta_dim();
      throw std::invalid_argument(os.str());
    }
  }

  void check_outcome(const Outcome& y) const { (void)index_of(y); }

 private:
  std::vector<int> radices_;
  std::size_t n_outcomes_ = 0;
  ErrorDistribution error_;
};

using ModelPtr = std::shared_ptr<const OutcomeModel>;

namespace detail {

inline double log_binomial_coefficient(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Binomial block: log C(n,y) + y log F(u) + (n-y) log(1-F(u)) for each alpha.
inline void fill_binomial_block(FactorBlock& block, int n, const ErrorDistribution& dist,
                                std::span<const double> index, bool with_score) {
  const auto M = static_cast<Eigen::Index>(index.size());
  block.log_f.resize(n + 1, M);
  block.f.resize(n + 1, M);
  std::vector<double> lc(index.size()), ls(index.size()), g(index.size()), h(index.size());
  for (std::size_t j = 0; j < index.size(); ++j) {
    lc[j] = dist.log_cdf(index[j]);
    ls[j] = dist.log_sf(index[j]);
    if (with_score) {
      g[j] = dist.pdf_over_cdf(index[j]);
      h[j] = dist.pdf_over_sf(index[j]);
    }
  }
  if (with_score) block.score.assign(1, RowMatrix(n + 1, M));
  for (int y = 0; y <= n; ++y) {
    const double coef = log_binomial_coefficient(n, y);
    for (Eigen::Index j = 0; j < M; ++j) {
      const double v = coef + (y > 0 ? y * lc[j] : 0.0) + (n - y > 0 ? (n - y) * ls[j] : 0.0);
      block.log_f(y, j) = v;
      block.f(y, j) = std::exp(v);
      if (with_score) block.score[0](y, j) = y * g[j] - (n - y) * h[j];
    }
  }
}

}  // namespace detail

/// Static binary choice panel with a regressor equal to 0 for the first T0
/// periods and 1 for the last T1 periods, summarised by the counts
/// y = (y0, y1) of successes in each block. Scalar theta.
class TwoBlockBinomialModel final : public OutcomeModel {
 public:
  TwoBlockBinomialModel(int T0, int T1, ErrorDistribution error)
      : OutcomeModel({checked(T0) + 1, checked(T1) + 1}, error), T0_(T0), T1_(T1) {}

  int T0() const noexcept { return T0_; }
  int T1() const noexcept { return T1_; }
  int theta_dim() const override { return 1; }
  using OutcomeModel::log_prob;

  double log_prob(const Outcome& y, double alpha, const Vector& theta) const override {
    check_outcome(y);
    check_theta(theta);
    const auto& F = error();
    const double u0 = alpha;
    const double u1 = theta(0) + alpha;
    return detail::log_binomial_coefficient(T0_, y[0]) + term(y[0], F.log_cdf(u0)) +
           term(T0_ - y[0], F.log_sf(u0)) + detail::log_binomial_coefficient(T1_, y[1]) +
           term(y[1], F.log_cdf(u1)) + term(T1_ - y[1], F.log_sf(u1));
  }

  Vector score(const Outcome& y, double alpha, const Vector& theta) const override {
    check_outcome(y);
    check_theta(theta);
    const double u1 = theta(0) + alpha;
    return scalar_theta(y[1] * error().pdf_over_cdf(u1) - (T1_ - y[1]) * error().pdf_over_sf(u1));
  }

  double alpha_score(const Outcome& y, double alpha, const Vector& theta) const override {
    check_outcome(y);
    check_theta(theta);
    const auto& F = error();
    const double u1 = theta(0) + alpha;
    return y[0] * F.pdf_over_cdf(alpha) - (T0_ - y[0]) * F.pdf_over_sf(alpha) +
           y[1] * F.pdf_over_cdf(u1) - (T1_ - y[1]) * F.pdf_over_sf(u1);
  }

  std::vector<FactorBlock> factor_blocks(std::span<const double> alphas,
                                         const Vector& theta) const override {
    check_theta(theta);
    std::vector<FactorBlock> blocks(2);
    std::vector<double> shifted(alphas.begin(), alphas.end());
    for (double& a : shifted) a += theta(0);
    detail::fill_binomial_block(blocks[0], T0_, error(), alphas, false);
    blocks[0].score.assign(1, RowMatrix::Zero(T0_ + 1, static_cast<Eigen::Index>(alphas.size())));
    detail::fill_binomial_block(blocks[1], T1_, error(), shifted, true);
    return blocks;
  }

  Outcome simulate(double alpha, const Vector& theta, std::mt19937_64& rng) const override {
    check_theta(theta);
    std::binomial_distribution<int> b0(T0_, error().cdf(alpha));
    std::binomial_distribution<int> b1(T1_, error().cdf(theta(0) + alpha));
    const int y0 = b0(rng);
    const int y1 = b1(rng);
    return {y0, y1};
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "two_block(T0=" << T0_ << ",T1=" << T1_ << "," << error().name() << ")";
    return os.str();
  }

 private:
  static int checked(int T) {
    if (T < 1) throw std::invalid_argument("TwoBlockBinomialModel: T0 and T1 must be >= 1");
    return T;
  }
  static double term(int count, double log_value) { return count > 0 ? count * log_value : 0.0; }

  int T0_, T1_;
};

/// Static binary choice panel y in {0,1}^T with
/// Pr(y_t = 1) = F(x_t' theta + alpha); covariates are a T x d matrix.
class BinarySequenceModel final : public OutcomeModel {
 public:
  BinarySequenceModel(Matrix covariates, ErrorDistribution error)
      : OutcomeModel(std::vector<int>(checked_rows(covariates), 2), error),
        x_(std::move(covariates)) {
    if (x_.cols() < 1) throw std::invalid_argument("BinarySequenceModel: need at least one covariate");
  }

  int periods() const noexcept { return static_cast<int>(x_.rows()); }
  const Matrix& covariates() const noexcept { return x_; }
  int theta_dim() const override { return static_cast<int>(x_.cols()); }
  using OutcomeModel::log_prob;

  double log_prob(const Outcome& y, double alpha, const Vector& theta) const override {
    check_outcome(y);
    check_theta(theta);
    double total = 0.0;
    for (int t = 0; t < periods(); ++t) {
      const double u = x_.row(t).dot(theta) + alpha;
      total += y[t] ? error().log_cdf(u) : error().log_sf(u);
    }
    return total;
  }

  Vector score(const Outcome& y, double alpha, const Vector& theta) const override {
    check_outcome(y);
    check_theta(theta);
    Vector s = Vector::Zero(theta_dim());
    for (int t = 0; t < periods(); ++t) {
      const double u = x_.row(t).dot(theta) + alpha;
      const double d = y[t] ? error().pdf_over_cdf(u) : -error().pdf_over_sf(u);
      s += d * x_.row(t).transpose();
    }
    return s;
  }

  double alpha_score(const Outcome& y, double alpha, const Vector& theta) const override {
    check_outcome(y);
    check_theta(theta);
    double s = 0.0;
    for (int t = 0; t < periods(); ++t) {
      const double u = x_.row(t).dot(theta) + alpha;
      s += y[t] ? error().pdf_over_cdf(u) : -error().pdf_over_sf(u);
    }
    return s;
  }

  std::vector<FactorBlock> factor_blocks(std::span<const double> alphas,
                                         const Vector& theta) const override {
    check_theta(theta);
    const auto M = static_cast<Eigen::Index>(alphas.size());
    const int d = theta_dim();
    std::vector<FactorBlock> blocks(static_cast<std::size_t>(periods()));
    for (int t = 0; t < periods(); ++t) {
      FactorBlock& block = blocks[static_cast<std::size_t>(t)];
      block.log_f.resize(2, M);
      block.f.resize(2, M);
      block.score.assign(static_cast<std::size_t>(d), RowMatrix(2, M));
      const double index = x_.row(t).dot(theta);
      for (Eigen::Index j = 0; j < M; ++j) {
        const double u = index + alphas[static_cast<std::size_t>(j)];
        block.log_f(0, j) = error().log_sf(u);
        block.log_f(1, j) = error().log_cdf(u);
        block.f(0, j) = error().sf(u);
        block.f(1, j) = error().cdf(u);
        const double g = error().pdf_over_cdf(u);
        const double h = error().pdf_over_sf(u);
        for (int c = 0; c < d; ++c) {
          block.score[static_cast<std::size_t>(c)](0, j) = -h * x_(t, c);
          block.score[static_cast<std::size_t>(c)](1, j) = g * x_(t, c);
        }
      }
    }
    return blocks;
  }

  Outcome simulate(double alpha, const Vector& theta, std::mt19937_64& rng) const override {
    check_theta(theta);
    Outcome y(static_cast<std::size_t>(periods()));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < periods(); ++t) {
      y[static_cast<std::size_t>(t)] = unif(rng) < error().cdf(x_.row(t).dot(theta) + alpha) ? 1 : 0;
    }
    return y;
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "binary_sequence(T=" << periods() << ",d=" << theta_dim() << "," << error().name() << ")";
    return os.str();
  }

 private:
  static std::size_t checked_rows(const Matrix& x) {
    if (x.rows() < 1) throw std::invalid_argument("BinarySequenceModel: need at least one period");
    if (x.rows() > 24) throw std::invalid_argument("BinarySequenceModel: T > 24 is not supported");
    return static_cast<std::size_t>(x.rows());
  }

  Matrix x_;
};

/// x_t = 1(t > T0) for t = 1..T0+T1, as a (T0+T1) x 1 covariate matrix.
inline Matrix two_block_covariates(int T0, int T1) {
  Matrix x = Matrix::Zero(T0 + T1, 1);
  for (int t = T0; t < T0 + T1; ++t) x(t, 0) = 1.0;
  return x;
}

/// Collapses a binary sequence to its block counts (y0, y1) for the two-block design.
inline Outcome counts_from_binary(const std::vector<int>& ystar, int T0) {
  if (T0 < 0 || static_cast<std::size_t>(T0) > ystar.size()) {
    throw std::invalid_argument("counts_from_binary: T0 exceeds sequence length");
  }
  int y0 = 0, y1 = 0;
  for (std::size_t t = 0; t < ystar.size(); ++t) {
    if (ystar[t] != 0 && ystar[t] != 1) throw std::domain_error("counts_from_binary: entries must be 0/1");
    (t < static_cast<std::size_t>(T0) ? y0 : y1) += ystar[t];
  }
  return {y0, y1};
}

inline Outcome counts_from_binary(const std::vector<int>& ystar, int T0, int T1) {
  if (T0 < 0 || T1 < 0 || ystar.size() != static_cast<std::size_t>(T0 + T1)) {
    throw std::invalid_argument("counts_from_binary: sequence length differs from T0 + T1");
  }
  return counts_from_binary(ystar, T0);
}

}  // namespace afd
