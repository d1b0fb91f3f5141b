#pragma once

#include "afd/errors.hpp"
#include "afd/model.hpp"
#include "afd/parallel.hpp"
#include "afd/prior.hpp"
#include "afd/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace afd {

/// Likelihoods f(y_(k) | x, alpha_j, theta) of every outcome on every prior
/// grid point, together with the prior predictive p_k and the posterior
/// pi(alpha_j | y_(k)).
///
/// Dense tables store the n_Y x M matrices. Factored tables keep only the
/// per-block factors and rebuild rows on demand, so memory is O(M * sum of
/// block sizes); all products then cost O(n_Y * M) per call. The posterior is
/// always formed in log space, which keeps it well defined when p_k itself
/// underflows (long panels).
class LikelihoodTable {
 public:
  static constexpr std::size_t kRowChunk = 256;

  LikelihoodTable(const OutcomeModel& model, const Vector& theta, const AlphaGrid& prior, bool dense)
      : prior_(prior), theta_(theta), dense_(dense), n_(model.outcome_count()), m_(prior.size()) {
    radices_ = model.radices();
    blocks_ = model.factor_blocks(std::span<const double>(prior.points()), theta);
    d_ = blocks_.empty() || blocks_[0].score.empty() ? 0 : static_cast<int>(blocks_[0].score.size());
    log_w_.resize(static_cast<Eigen::Index>(m_));
    for (std::size_t j = 0; j < m_; ++j) log_w_(static_cast<Eigen::Index>(j)) = std::log(prior.weights()[j]);
    log_p_.resize(static_cast<Eigen::Index>(n_));
    if (dense_) {
      log_f_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_));
      f_.resize(log_f_.rows(), log_f_.cols());
      post_.resize(log_f_.rows(), log_f_.cols());
    }
    const ChunkRange range{n_, kRowChunk};
    parallel_chunks(range.count(), [&](std::size_t c) {
      RowVector lf(static_cast<Eigen::Index>(m_)), f(lf.size()), post(lf.size());
      for (std::size_t k = range.begin(c); k < range.end(c); ++k) {
        compute_log_f(k, lf);
        log_p_(static_cast<Eigen::Index>(k)) = log_sum_exp(lf + log_w_.transpose());
        if (dense_) {
          const auto r = static_cast<Eigen::Index>(k);
          log_f_.row(r) = lf;
          f_.row(r) = lf.array().exp().matrix();
          post_.row(r) = (lf.array() + log_w_.transpose().array() - log_p_(r)).exp().matrix();
        }
      }
    });
    check_positivity();
    p_ = log_p_.array().exp().matrix();
  }

  std::size_t outcome_count() const noexcept { return n_; }
  std::size_t grid_size() const noexcept { return m_; }
  bool dense() const noexcept { return dense_; }
  int theta_dim() const noexcept { return d_; }
  const AlphaGrid& prior() const noexcept { return prior_; }
  const Vector& theta() const noexcept { return theta_; }

  /// Prior predictive probabilities. In factored mode entries may underflow to
  /// zero; log_p() is always finite.
  const Vector& p() const noexcept { return p_; }
  const Vector& log_p() const noexcept { return log_p_; }

  const RowMatrix& likelihood() const {
    require_dense("likelihood matrix");
    return f_;
  }
  const RowMatrix& log_likelihood() const {
    require_dense("log-likelihood matrix");
    return log_f_;
  }
  const RowMatrix& posterior() const {
    require_dense("posterior matrix");
    return post_;
  }

  /// F g: for each outcome, sum_j f_kj g_j.
  Vector likelihood_times(const Vector& g) const {
    if (dense_) return f_ * g;
    Vector out(static_cast<Eigen::Index>(n_));
    for_rows<true, false>([&](std::size_t k, const RowVector& f, const RowVector&) {
      out(static_cast<Eigen::Index>(k)) = f.dot(g.transpose());
    });
    return out;
  }

  /// Posterior means: sum_j pi(j | k) g_j.
  Vector posterior_times(const Vector& g) const {
    if (dense_) return post_ * g;
    Vector out(static_cast<Eigen::Index>(n_));
    for_rows<false, true>([&](std::size_t k, const RowVector&, const RowVector& post) {
      out(static_cast<Eigen::Index>(k)) = post.dot(g.transpose());
    });
    return out;
  }

  /// F' v (length M).
  Vector likelihood_transpose_times(const Vector& v) const {
    if (dense_) return f_.transpose() * v;
    return reduce_rows<true, false>([&](std::size_t k, const RowVector& f, const RowVector&, Vector& acc) {
      acc += v(static_cast<Eigen::Index>(k)) * f.transpose();
    });
  }

  /// Posterior' v (length M).
  Vector posterior_transpose_times(const Vector& v) const {
    if (dense_) return post_.transpose() * v;
    return reduce_rows<false, true>([&](std::size_t k, const RowVector&, const RowVector& post, Vector& acc) {
      acc += v(static_cast<Eigen::Index>(k)) * post.transpose();
    });
  }

  /// d x n_Y matrix of posterior-weighted scores sum_j pi(j|k) d/dtheta log f(y_k | alpha_j).
  Matrix integrated_score() const {
    Matrix S(d_, static_cast<Eigen::Index>(n_));
    for_rows<false, true>([&](std::size_t k, const RowVector&, const RowVector& post) {
      for (int c = 0; c < d_; ++c) S(c, static_cast<Eigen::Index>(k)) = post.dot(score_row(k, c));
    });
    return S;
  }

  /// Row of d/dtheta_c log f(y_k | alpha_j) over the grid.
  RowVector score_row(std::size_t k, int c) const {
    RowVector out = RowVector::Zero(static_cast<Eigen::Index>(m_));
    std::size_t rest = k;
    for (std::size_t b = radices_.size(); b-- > 0;) {
      const auto digit = static_cast<Eigen::Index>(rest % static_cast<std::size_t>(radices_[b]));
      rest /= static_cast<std::size_t>(radices_[b]);
      out += blocks_[b].score[static_cast<std::size_t>(c)].row(digit);
    }
    return out;
  }

  /// Calls fn(k, f_row, posterior_row) for every outcome, in parallel chunks.
  /// Rows not requested through the template flags are left unspecified.
  template <bool WantF = true, bool WantPost = true, class Fn>
  void for_rows(Fn&& fn) const {
    const ChunkRange range{n_, kRowChunk};
    parallel_chunks(range.count(), [&](std::size_t c) {
      RowVector f(static_cast<Eigen::Index>(m_)), post(f.size()), lf(f.size());
      for (std::size_t k = range.begin(c); k < range.end(c); ++k) {
        row<WantF, WantPost>(k, f, post, lf);
        fn(k, f, post);
      }
    });
  }

  void row(std::size_t k, RowVector& f, RowVector& post) const {
    RowVector lf(static_cast<Eigen::Index>(m_));
    row<true, true>(k, f, post, lf);
  }

 private:
  template <bool WantF, bool WantPost>
  void row(std::size_t k, RowVector& f, RowVector& post, RowVector& lf) const {
    const auto r = static_cast<Eigen::Index>(k);
    if (dense_) {
      if constexpr (WantF) f = f_.row(r);
      if constexpr (WantPost) post = post_.row(r);
      return;
    }
    compute_log_f(k, lf);
    if constexpr (WantF) f = lf.array().exp().matrix();
    if constexpr (WantPost) post = (lf.array() + log_w_.transpose().array() - log_p_(r)).exp().matrix();
  }

  // Ordered reduction over fixed row chunks: bit-identical for any thread count.
  template <bool WantF, bool WantPost, class Fn>
  Vector reduce_rows(Fn&& fn) const {
    const ChunkRange range{n_, kRowChunk};
    std::vector<Vector> partial(range.count(), Vector::Zero(static_cast<Eigen::Index>(m_)));
    parallel_chunks(range.count(), [&](std::size_t c) {
      RowVector f(static_cast<Eigen::Index>(m_)), post(f.size()), lf(f.size());
      for (std::size_t k = range.begin(c); k < range.end(c); ++k) {
        row<WantF, WantPost>(k, f, post, lf);
        fn(k, f, post, partial[c]);
      }
    });
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(m_));
    for (const auto& v : partial) acc += v;
    return acc;
  }

  void compute_log_f(std::size_t k, RowVector& out) const {
    out.setZero();
    std::size_t rest = k;
    for (std::size_t b = radices_.size(); b-- > 0;) {
      const auto digit = static_cast<Eigen::Index>(rest % static_cast<std::size_t>(radices_[b]));
      rest /= static_cast<std::size_t>(radices_[b]);
      out += blocks_[b].log_f.row(digit);
    }
  }

  static double log_sum_exp(const RowVector& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().sum());
  }

  void check_positivity() const {
    for (std::size_t k = 0; k < n_; ++k) {
      const double lp = log_p_(static_cast<Eigen::Index>(k));
      const bool bad = dense_ ? !(lp >= std::log(1e-300)) : !std::isfinite(lp);
      if (bad) {
        std::ostringstream os;
        os << "prior predictive probability of outcome " << k << " is " << std::exp(lp)
           << "; Q requires p_prior(y|x,theta) > 0 for every outcome";
        throw PositivityError(os.str());
      }
    }
  }

  void require_dense(const char* what) const {
    if (!dense_) throw UnsupportedOperation(std::string(what) + " is only stored in dense mode");
  }

  AlphaGrid prior_;
  Vector theta_;
  bool dense_;
  std::size_t n_, m_;
  int d_ = 0;
  std::vector<int> radices_;
  std::vector<FactorBlock> blocks_;
  Vector log_w_;
  Vector log_p_, p_;
  RowMatrix log_f_, f_, post_;
};

/// Outcome probabilities sum_j w_j f(y_(k) | x, alpha_j, theta) under a
/// discrete heterogeneity distribution, formed by log-sum-exp. No positivity
/// requirement: entries may be zero.
inline Vector mixture_probabilities(const OutcomeModel& model, const Vector& theta, const AlphaGrid& grid) {
  const auto blocks = model.factor_blocks(std::span<const double>(grid.points()), theta);
  const auto& radices = model.radices();
  const auto n = model.outcome_count();
  const auto m = static_cast<Eigen::Index>(grid.size());
  RowVector log_w(m);
  for (Eigen::Index j = 0; j < m; ++j) log_w(j) = std::log(grid.weights()[static_cast<std::size_t>(j)]);
  Vector out(static_cast<Eigen::Index>(n));
  const ChunkRange range{n, LikelihoodTable::kRowChunk};
  parallel_chunks(range.count(), [&](std::size_t c) {
    RowVector lf(m);
    for (std::size_t k = range.begin(c); k < range.end(c); ++k) {
      lf = log_w;
      std::size_t rest = k;
      for (std::size_t b = radices.size(); b-- > 0;) {
        const auto digit = static_cast<Eigen::Index>(rest % static_cast<std::size_t>(radices[b]));
        rest /= static_cast<std::size_t>(radices[b]);
        lf += blocks[b].log_f.row(digit);
      }
      const double mx = lf.maxCoeff();
      out(static_cast<Eigen::Index>(k)) = std::isfinite(mx) ? std::exp(mx) * (lf.array() - mx).exp().sum() : 0.0;
    }
  });
  return out;
}

/// f(y_(k) | x, alpha, theta) for all outcomes at one alpha.
inline Vector outcome_probabilities(const OutcomeModel& model, const Vector& theta, double alpha) {
  return mixture_probabilities(model, theta, AlphaGrid({alpha}, {1.0}));
}

}  // namespace afd
