#pragma once

#include "afd/distributions.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace afd {

/// Discrete distribution over the fixed effect alpha: strictly increasing
/// support points with positive weights summing to one. Used both for the
/// prior and for the true heterogeneity distribution pi0.
class AlphaGrid {
 public:
  AlphaGrid() = default;

  AlphaGrid(std::vector<double> points, std::vector<double> weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    validate();
  }

  const std::vector<double>& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  double mean() const {
    double m = 0.0;
    for (std::size_t j = 0; j < size(); ++j) m += weights_[j] * points_[j];
    return m;
  }

  /// Short human-readable label, used in report rows.
  const std::string& label() const noexcept { return label_; }
  AlphaGrid& set_label(std::string label) {
    label_ = std::move(label);
    return *this;
  }

 private:
  void validate() const {
    if (points_.empty()) throw std::invalid_argument("AlphaGrid: no points");
    if (points_.size() != weights_.size()) {
      throw std::invalid_argument("AlphaGrid: points and weights differ in length");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j) {
      if (!std::isfinite(points_[j])) throw std::invalid_argument("AlphaGrid: non-finite point");
      if (!(weights_[j] > 0.0)) {
        throw std::invalid_argument("AlphaGrid: weights must be strictly positive");
      }
      if (j > 0 && !(points_[j] > points_[j - 1])) {
        throw std::invalid_argument("AlphaGrid: points must be strictly increasing");
      }
      total += weights_[j];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "AlphaGrid: weights sum to " << total << ", expected 1";
      throw std::invalid_argument(os.str());
    }
  }

  std::vector<double> points_;
  std::vector<double> weights_;
  std::string label_;
};

/// Equal-weight quantile grid alpha_j = location + scale * F^{-1}(j/(M+1)).
inline AlphaGrid inverse_cdf_grid(const ErrorDistribution& dist, std::size_t M,
                                  double location = 0.0, double scale = 1.0) {
  if (M == 0) throw std::invalid_argument("inverse_cdf_grid: M must be at least 1");
  if (!(scale > 0.0)) throw std::invalid_argument("inverse_cdf_grid: scale must be positive");
  std::vector<double> points(M), weights(M, 1.0 / static_cast<double>(M));
  for (std::size_t j = 0; j < M; ++j) {
    points[j] = location + scale * dist.quantile(static_cast<double>(j + 1) / static_cast<double>(M + 1));
  }
  // Exact mirror symmetry about the location for symmetric distributions.
  if (dist.symmetric()) {
    for (std::size_t j = 0; j < M / 2; ++j) {
      const double half = 0.5 * ((points[M - 1 - j] - location) - (points[j] - location));
      points[j] = location - half;
      points[M - 1 - j] = location + half;
    }
    if (M % 2 == 1) points[M / 2] = location;
  }
  AlphaGrid grid(std::move(points), std::move(weights));
  std::ostringstream os;
  os << dist.name() << "(" << location << "," << scale << ")/" << M;
  grid.set_label(os.str());
  return grid;
}

/// N(mean, sd^2) discretised as in the default prior: M equal-weight quantiles.
inline AlphaGrid normal_grid(double mean, double sd, std::size_t M) {
  AlphaGrid grid = inverse_cdf_grid(ErrorDistribution::probit(), M, mean, sd);
  std::ostringstream os;
  os << "N(" << mean << "," << sd * sd << ")";
  grid.set_label(os.str());
  return grid;
}

inline AlphaGrid point_mass(double z) {
  AlphaGrid grid({z}, {1.0});
  std::ostringstream os;
  os << "delta_" << z;
  grid.set_label(os.str());
  return grid;
}

/// Midpoint rule for U[a,b].
inline AlphaGrid uniform_grid(double a, double b, std::size_t M) {
  if (!(a < b)) throw std::invalid_argument("uniform_grid: need a < b");
  if (M == 0) throw std::invalid_argument("uniform_grid: M must be at least 1");
  std::vector<double> points(M), weights(M, 1.0 / static_cast<double>(M));
  const double h = (b - a) / static_cast<double>(M);
  for (std::size_t j = 0; j < M; ++j) points[j] = a + (static_cast<double>(j) + 0.5) * h;
  AlphaGrid grid(std::move(points), std::move(weights));
  std::ostringstream os;
  os << "U[" << a << "," << b << "]";
  grid.set_label(os.str());
  return grid;
}

/// A heterogeneity distribution that can be both discretised (for
/// quadrature) and sampled exactly (for simulation).
class AlphaDistribution {
 public:
  enum class Kind { normal, point, uniform, discrete };

  static AlphaDistribution normal(double mean, double sd, std::size_t M = 1000) {
    if (!(sd > 0.0)) throw std::invalid_argument("normal heterogeneity: sd must be positive");
    AlphaDistribution d(Kind::normal, normal_grid(mean, sd, M));
    d.a_ = mean;
    d.b_ = sd;
    return d;
  }
  static AlphaDistribution point(double z) {
    AlphaDistribution d(Kind::point, point_mass(z));
    d.a_ = z;
    return d;
  }
  static AlphaDistribution uniform(double a, double b, std::size_t M = 1000) {
    AlphaDistribution d(Kind::uniform, uniform_grid(a, b, M));
    d.a_ = a;
    d.b_ = b;
    return d;
  }
  static AlphaDistribution discrete(AlphaGrid grid) { return AlphaDistribution(Kind::discrete, std::move(grid)); }

  Kind kind() const noexcept { return kind_; }
  const AlphaGrid& grid() const noexcept { return grid_; }
  const std::string& label() const noexcept { return grid_.label(); }

  /// Exact draw: continuous for normal/uniform, from the support otherwise.
  double sample(std::mt19937_64& rng) const {
    switch (kind_) {
      case Kind::normal: return std::normal_distribution<double>(a_, b_)(rng);
      case Kind::uniform: return std::uniform_real_distribution<double>(a_, b_)(rng);
      case Kind::point: return a_;
      case Kind::discrete: {
        std::discrete_distribution<std::size_t> pick(grid_.weights().begin(), grid_.weights().end());
        return grid_.points()[pick(rng)];
      }
    }
    return 0.0;
  }

 private:
  AlphaDistribution(Kind kind, AlphaGrid grid) : kind_(kind), grid_(std::move(grid)) {}

  Kind kind_;
  AlphaGrid grid_;
  double a_ = 0.0, b_ = 0.0;
};

/// sum_j w_j g(alpha_j) for vector-valued g.
inline Eigen::VectorXd expect(const AlphaGrid& grid,
                              const std::function<Eigen::VectorXd(double)>& g) {
  Eigen::VectorXd acc;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    Eigen::VectorXd value = g(grid.points()[j]);
    if (!value.allFinite()) {
      std::ostringstream os;
      os << "expect: non-finite integrand at alpha = " << grid.points()[j];
      throw std::domain_error(os.str());
    }
    if (j == 0) acc = Eigen::VectorXd::Zero(value.size());
    acc += grid.weights()[j] * value;
  }
  return acc;
}

inline double expect_scalar(const AlphaGrid& grid, const std::function<double(double)>& g) {
  return expect(grid, [&](double a) { return Eigen::VectorXd::Constant(1, g(a)); })(0);
}

}  // namespace afd
