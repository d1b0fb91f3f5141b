#include "afd/afd.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

using namespace afd;

namespace {

const AlphaGrid& std_prior() {
  static const AlphaGrid g = normal_grid(0.0, 1.0, 1000);
  return g;
}

std::vector<double> sorted_real_eigs(const Matrix& q) {
  Eigen::EigenSolver<Matrix> es(q, false);
  std::vector<double> ev;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ev.push_back(es.eigenvalues()(i).real());
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

}  // namespace

TEST(PriorPredictive, PointPriorUniform) {
  const TwoBlockBinomialModel m(1, 1, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(0.0), point_mass(0.0));
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(s.p()(k), 0.25, 1e-15);
}

TEST(PriorPredictive, NormalizedAndPositive) {
  const TwoBlockBinomialModel m(1, 1, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  EXPECT_NEAR(s.p().sum(), 1.0, 1e-12);
  EXPECT_GT(s.p().minCoeff(), 0.0);
}

TEST(PriorPredictive, MatchesBruteForce) {
  const TwoBlockBinomialModel m(2, 2, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  const oracle::BruteQ b = oracle::brute_q(m, scalar_theta(1.0), std_prior());
  for (Eigen::Index k = 0; k < 9; ++k) EXPECT_NEAR(s.p()(k), static_cast<double>(b.p[static_cast<std::size_t>(k)]), 1e-12);
  EXPECT_NEAR((s.q() - b.q).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(QMatrix, ColumnStochastic) {
  for (const auto& F : {ErrorDistribution::probit(), ErrorDistribution::logit_std(), ErrorDistribution::laplace()}) {
    for (auto [T0, T1] : {std::pair{1, 1}, {2, 2}, {1, 3}, {3, 3}}) {
      const TwoBlockBinomialModel m(T0, T1, F);
      const SpectralQ s(m, scalar_theta(1.0), std_prior());
      EXPECT_LT((s.q().colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
      EXPECT_GE(s.q().minCoeff(), 0.0);
      EXPECT_LE(s.q().maxCoeff(), 1.0);
    }
  }
}

TEST(Eigenvalues, TwoPeriodGolden) {
  const TwoBlockBinomialModel m(1, 1, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  const std::vector<double> want = {1.0, 0.47463, 0.10727, 0.00016};
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(s.eigenvalues()(i), want[static_cast<std::size_t>(i)], 5e-5);
}

TEST(Eigenvalues, FourPeriodGolden) {
  const TwoBlockBinomialModel m(2, 2, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  const std::vector<double> want = {1.0,       0.6442015, 0.2830132, 0.0763991, 0.0101215,
                                    1.5475e-4, 3.3960e-5, 7.87364e-8, 7.5625e-10};
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_NEAR(s.eigenvalues()(i), want[static_cast<std::size_t>(i)], 1e-6);
  EXPECT_NEAR(s.eigenvalues()(7), want[7], 1e-9);
  EXPECT_NEAR(s.eigenvalues()(8), want[8], 1e-9);
  EXPECT_NEAR(s.eigenvalues()(0), 1.0, 1e-10);
}

TEST(Eigenvalues, SimilarityWithNonsymmetricSolver) {
  for (const auto& F : {ErrorDistribution::probit(), ErrorDistribution::logit_std()}) {
    const TwoBlockBinomialModel m(2, 3, F);
    const SpectralQ s(m, scalar_theta(0.6), std_prior());
    const auto ev = sorted_real_eigs(s.q());
    for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], s.eigenvalues()(static_cast<Eigen::Index>(i)), 1e-8);
    EXPECT_GE(s.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(Eigenvalues, PointPriorRankOne) {
  const TwoBlockBinomialModel m(2, 2, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), point_mass(0.3));
  EXPECT_NEAR(s.eigenvalues()(0), 1.0, 1e-10);
  EXPECT_LT(s.eigenvalues().tail(8).cwiseAbs().maxCoeff(), 1e-10);
  const TwoBlockBinomialModel m11(1, 1, ErrorDistribution::probit());
  EXPECT_EQ(SpectralQ(m11, scalar_theta(1.0), point_mass(0.0)).zero_eig_count(1e-9), 3u);
}

TEST(Eigenvalues, RankBoundedByGridSize) {
  const TwoBlockBinomialModel m(3, 3, ErrorDistribution::probit());
  const AlphaGrid g = normal_grid(0.0, 1.0, 5);
  const SpectralQ s(m, scalar_theta(1.0), g);
  EXPECT_LE((s.eigenvalues().array() > 1e-10).count(), 5);
}

TEST(ZeroEigCount, Examples) {
  const SpectralQ probit(TwoBlockBinomialModel(2, 2, ErrorDistribution::probit()), scalar_theta(1.0), std_prior());
  EXPECT_EQ(probit.zero_eig_count(1e-9), 1u);
  const SpectralQ logit(TwoBlockBinomialModel(2, 2, ErrorDistribution::logit_std()), scalar_theta(1.0), std_prior());
  EXPECT_EQ(logit.zero_eig_count(1e-8), 4u);
  EXPECT_EQ(logit.zero_eig_count(1e-9), 4u);
}

TEST(StemApply, Examples) {
  const TwoBlockBinomialModel m(2, 2, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  const Matrix I = Matrix::Identity(9, 9);
  EXPECT_LT((s.stem_apply([](double) { return 1.0; }) - I).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((s.stem_apply([](double l) { return l; }) - s.q()).cwiseAbs().maxCoeff(), 1e-10);
  const Matrix IQ = I - s.q();
  EXPECT_LT((s.stem_apply([](double l) { return (1 - l) * (1 - l); }) - IQ * IQ).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EigenVectors, LeftRightBiorthogonal) {
  const TwoBlockBinomialModel m(2, 2, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  const Matrix L = s.left_eigenvectors();
  const Matrix R = s.right_eigenvectors();
  EXPECT_LT((L * R - Matrix::Identity(9, 9)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((s.q() * R - R * s.eigenvalues().asDiagonal()).cwiseAbs().maxCoeff(), 1e-10);
  // First left eigenvector of a column-stochastic matrix is constant.
  const Vector l0 = L.row(0).transpose();
  EXPECT_LT((l0.array() - l0(0)).abs().maxCoeff(), 1e-10);
}

TEST(PolynomialApply, Examples) {
  const TwoBlockBinomialModel m(2, 2, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  Vector v(9);
  for (Eigen::Index i = 0; i < 9; ++i) v(i) = z(rng);
  // coefficient vector c means sum_r c_r (I - Q)^r
  EXPECT_LT((s.polynomial_apply({1.0}, v) - v).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((s.polynomial_apply({0.0, 1.0}, s.p()) - (s.p() - s.q() * s.p())).cwiseAbs().maxCoeff(), 1e-14);
  const Vector cubic = s.polynomial_apply({0.0, 0.0, 0.0, 1.0}, v);
  const Vector spectral = s.stem_apply([](double l) { return std::pow(1 - l, 3); }) * v;
  EXPECT_LT((cubic - spectral).cwiseAbs().maxCoeff(), 1e-9);
  const Vector left = s.polynomial_apply_left({0.0, 0.0, 0.0, 1.0}, v);
  const Vector left_ref = s.stem_apply([](double l) { return std::pow(1 - l, 3); }).transpose() * v;
  EXPECT_LT((left - left_ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FactoredMode, MatchesDense) {
  const TwoBlockBinomialModel m(6, 7, ErrorDistribution::probit());  // 56 outcomes
  SpectralOptions factored;
  factored.dense_limit = 0;
  const SpectralQ d(m, scalar_theta(0.8), std_prior());
  const SpectralQ f(m, scalar_theta(0.8), std_prior(), factored);
  ASSERT_TRUE(d.dense());
  ASSERT_FALSE(f.dense());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  Vector v(56);
  for (Eigen::Index i = 0; i < 56; ++i) v(i) = z(rng);
  EXPECT_LT((d.apply(v) - f.apply(v)).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT((d.apply_left(v) - f.apply_left(v)).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT((d.apply(v) - d.q() * v).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT((d.p() - f.p()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(f.q(), UnsupportedOperation);
  EXPECT_THROW(f.eigenvalues(), UnsupportedOperation);
}

TEST(FactoredMode, LargePanelStaysFinite) {
  const TwoBlockBinomialModel m(256, 256, ErrorDistribution::probit());
  const SpectralQ s(m, scalar_theta(1.0), std_prior());
  EXPECT_FALSE(s.dense());
  EXPECT_NEAR(s.p().sum(), 1.0, 1e-10);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(m.outcome_count()));
  EXPECT_LT((s.apply_left(ones) - ones).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Positivity, ZeroPredictiveProbabilityRejected) {
  // A two-point grid far in the tail makes p(y) underflow for most outcomes.
  const TwoBlockBinomialModel m(30, 30, ErrorDistribution::probit());
  const AlphaGrid far({60.0, 61.0}, {0.5, 0.5});
  EXPECT_THROW(SpectralQ(m, scalar_theta(0.0), far), PositivityError);
}

TEST(EigenReport, FloorFlag) {
  const auto rows = eigen_report({{1, 1}, {2, 2}, {3, 3}}, {1.0}, ErrorDistribution::probit(), std_prior());
  ASSERT_EQ(rows.size(), 4u + 9u + 16u);
  EXPECT_NEAR(rows[1].lambda, 0.47463, 5e-5);
  EXPECT_EQ(rows[4].j, 1);
  EXPECT_NEAR(rows[4].lambda, 1.0, 1e-10);
  EXPECT_TRUE(rows.back().below_fp_floor);
  EXPECT_LT(rows.back().lambda, 1e-15);
  EXPECT_FALSE(rows[0].below_fp_floor);
}

TEST(Threads, ResultsIndependentOfWorkerCount) {
  const TwoBlockBinomialModel m(40, 40, ErrorDistribution::probit());
  SpectralOptions factored;
  factored.dense_limit = 0;
  Vector v = Vector::LinSpaced(static_cast<Eigen::Index>(m.outcome_count()), -1.0, 1.0);
  set_thread_count(1);
  const Vector a = SpectralQ(m, scalar_theta(1.0), std_prior(), factored).apply_left(v);
  set_thread_count(4);
  const Vector b = SpectralQ(m, scalar_theta(1.0), std_prior(), factored).apply_left(v);
  set_thread_count(0);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}
