#pragma once

#include "afd/errors.hpp"
#include "afd/likelihood.hpp"
#include "afd/model.hpp"
#include "afd/prior.hpp"
#include "afd/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

namespace afd {

struct SpectralOptions {
  /// Largest n_Y for which Q is materialised and decomposed.
  std::size_t dense_limit = 4096;
  /// Default cutoff below which an eigenvalue counts as zero.
  double zero_threshold = 1e-9;
};

/// Posterior predictive matrix Q(x,theta) = F diag(w) F' diag(1/p) for one
/// covariate value and parameter, equivalently Q = F Post' with Post the
/// n_Y x M posterior matrix.
///
/// The spectrum is taken from the symmetric matrix
/// Qbar = P^{-1/2} Q P^{1/2} = A A',  A = P^{-1/2} F W^{1/2},
/// through a singular value decomposition of A, so lambda_k = sigma_k^2 and the
/// eigenvectors of Qbar are the left singular vectors. Squaring singular
/// values keeps small eigenvalues accurate to about eps * sigma_max * sigma_k
/// rather than eps.
///
/// Q and its decomposition are computed on first use and cached; the cache is
/// thread safe, so a SpectralQ can be shared read-only between workers.
class SpectralQ {
 public:
  SpectralQ(const OutcomeModel& model, const Vector& theta, const AlphaGrid& prior,
            SpectralOptions options = {})
      : options_(options),
        table_(std::make_shared<const LikelihoodTable>(model, theta, prior,
                                                       model.outcome_count() <= options.dense_limit)),
        cache_(std::make_shared<Cache>()) {}

  std::size_t outcome_count() const noexcept { return table_->outcome_count(); }
  bool dense() const noexcept { return table_->dense(); }
  const SpectralOptions& options() const noexcept { return options_; }
  const LikelihoodTable& table() const noexcept { return *table_; }
  const Vector& p() const noexcept { return table_->p(); }
  const Vector& log_p() const noexcept { return table_->log_p(); }
  const Vector& theta() const noexcept { return table_->theta(); }

  /// Q v.
  Vector apply(const Vector& v) const {
    return table_->likelihood_times(table_->posterior_transpose_times(v));
  }

  /// r' Q for a row vector r (given as a column).
  Vector apply_left(const Vector& r) const {
    return table_->posterior_times(table_->likelihood_transpose_times(r));
  }

  /// Rows of R times Q.
  Matrix apply_left(const Matrix& R) const {
    if (dense()) return (R * table_->likelihood()) * table_->posterior().transpose();
    Matrix out(R.rows(), R.cols());
    for (Eigen::Index i = 0; i < R.rows(); ++i) out.row(i) = apply_left(Vector(R.row(i).transpose())).transpose();
    return out;
  }

  /// Dense Q (n_Y x n_Y).
  const Matrix& q() const {
    require_dense("q()");
    std::call_once(cache_->q_once, [&] {
      cache_->q = table_->likelihood() * table_->posterior().transpose();
    });
    return cache_->q;
  }

  /// Eigenvalues of Q, descending, clamped into [0,1].
  const Vector& eigenvalues() const {
    decompose();
    return cache_->lambda;
  }

  /// Orthonormal eigenvectors of Qbar, columns ordered as eigenvalues().
  const Matrix& sym_eigenvectors() const {
    decompose();
    return cache_->ubar;
  }

  /// Left eigenvectors of Q as rows: row k is ubar_k' P^{-1/2}.
  Matrix left_eigenvectors() const {
    const Matrix& U = sym_eigenvectors();
    return U.transpose() * inv_sqrt_p().asDiagonal();
  }

  /// Right eigenvectors of Q as columns: P^{1/2} ubar_k.
  Matrix right_eigenvectors() const {
    const Matrix& U = sym_eigenvectors();
    return sqrt_p().asDiagonal() * U;
  }

  /// Primary matrix function h(Q) = P^{1/2} Ubar diag(h(lambda)) Ubar' P^{-1/2}.
  Matrix stem_apply(const std::function<double(double)>& h) const {
    const Vector& lambda = eigenvalues();
    Vector hv(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) hv(i) = h(lambda(i));
    return from_symmetric(hv);
  }

  /// P^{1/2} Ubar diag(values) Ubar' P^{-1/2} for given per-eigenvalue values.
  Matrix from_symmetric(const Vector& values) const {
    const Matrix& U = sym_eigenvectors();
    const Matrix inner = U * values.asDiagonal() * U.transpose();
    return sqrt_p().asDiagonal() * inner * inv_sqrt_p().asDiagonal();
  }

  /// sum_i c_i (I - Q)^i v by Horner's rule, using only products with Q.
  Vector polynomial_apply(const std::vector<double>& coeffs, const Vector& v) const {
    if (coeffs.empty()) return Vector::Zero(v.size());
    Vector r = coeffs.back() * v;
    for (std::size_t i = coeffs.size() - 1; i-- > 0;) r = (r - apply(r)) + coeffs[i] * v;
    return r;
  }

  /// sum_i c_i r' (I - Q)^i, as a column.
  Vector polynomial_apply_left(const std::vector<double>& coeffs, const Vector& r) const {
    if (coeffs.empty()) return Vector::Zero(r.size());
    Vector out = coeffs.back() * r;
    for (std::size_t i = coeffs.size() - 1; i-- > 0;) out = (out - apply_left(out)) + coeffs[i] * r;
    return out;
  }

  std::size_t zero_eig_count(double threshold) const {
    const Vector& lambda = eigenvalues();
    return static_cast<std::size_t>((lambda.array() < threshold).count());
  }
  std::size_t zero_eig_count() const { return zero_eig_count(options_.zero_threshold); }

  Vector sqrt_p() const { return (0.5 * log_p()).array().exp().matrix(); }
  Vector inv_sqrt_p() const { return (-0.5 * log_p()).array().exp().matrix(); }

 private:
  struct Cache {
    std::once_flag q_once, eig_once;
    Matrix q;
    Vector lambda;
    Matrix ubar;
  };

  void require_dense(const char* what) const {
    if (!dense()) {
      std::ostringstream os;
      os << "SpectralQ::" << what << " needs dense mode (n_Y = " << outcome_count()
         << " exceeds dense_limit = " << options_.dense_limit << "); use the polynomial path";
      throw UnsupportedOperation(os.str());
    }
  }

  void decompose() const {
    require_dense("eigendecomposition");
    std::call_once(cache_->eig_once, [&] {
      const LikelihoodTable& t = *table_;
      // A_kj = sqrt(f_kj * post_kj) = f_kj sqrt(w_j / p_k).
      Matrix A = t.log_likelihood();
      for (Eigen::Index j = 0; j < A.cols(); ++j) {
        A.col(j).array() += 0.5 * std::log(t.prior().weights()[static_cast<std::size_t>(j)]);
      }
      A.array().colwise() -= 0.5 * t.log_p().array();
      A = A.array().exp().matrix();
      Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeFullU);
      const Vector& sigma = svd.singularValues();
      const auto n = A.rows();
      Vector lambda = Vector::Zero(n);
      lambda.head(sigma.size()) = sigma.array().square().matrix();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (lambda(i) > 1.0 + 1e-8 || !std::isfinite(lambda(i))) {
          std::ostringstream os;
          os << "eigenvalue " << lambda(i) << " of Q lies outside [0,1]";
          throw SpectrumError(os.str());
        }
        lambda(i) = std::clamp(lambda(i), 0.0, 1.0);
      }
      cache_->lambda = std::move(lambda);
      cache_->ubar = svd.matrixU();
    });
  }

  SpectralOptions options_;
  std::shared_ptr<const LikelihoodTable> table_;
  std::shared_ptr<Cache> cache_;
};

/// One row of an eigenvalue report.
struct EigenRow {
  int T = 0, T0 = 0, T1 = 0;
  double theta = 0.0;
  int j = 0;  // 1-based, descending order
  double lambda = 0.0;
  bool below_fp_floor = false;
};

inline constexpr double kDoublePrecisionFloor = 1e-15;

/// Spectrum of Q for each two-block design (T0, T1) and theta.
inline std::vector<EigenRow> eigen_report(const std::vector<std::pair<int, int>>& designs,
                                          const std::vector<double>& thetas,
                                          const ErrorDistribution& error, const AlphaGrid& prior,
                                          SpectralOptions options = {}) {
  std::vector<EigenRow> rows;
  for (const auto& [T0, T1] : designs) {
    const TwoBlockBinomialModel model(T0, T1, error);
    for (double theta : thetas) {
      const SpectralQ spec(model, scalar_theta(theta), prior, options);
      const Vector& lambda = spec.eigenvalues();
      for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        rows.push_back({T0 + T1, T0, T1, theta, static_cast<int>(i + 1), lambda(i),
                        lambda(i) < kDoublePrecisionFloor});
      }
    }
  }
  return rows;
}

}  // namespace afd
