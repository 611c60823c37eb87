#include <gtest/gtest.h>

#include <random>

#include "lts/regress.hpp"
#include "test_util.hpp"

using namespace lts;

TEST(Dataset, RejectsBadShapesAndValues) {
  EXPECT_THROW(Dataset(Matrix(0, 1), Vector(0)), InvalidSpec);
  EXPECT_THROW(Dataset(Matrix::Zero(3, 2), Vector::Zero(2)), InvalidSpec);
  Matrix X = Matrix::Zero(2, 1);
  X(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Dataset(X, Vector::Zero(2)), InvalidSpec);
}

TEST(Dataset, DefaultCoverage) {
  EXPECT_EQ(default_coverage(30, 12), 21u);
  EXPECT_EQ(default_coverage(12, 3), 8u);
  EXPECT_EQ(default_coverage(25, 10), 17u);
}

TEST(OlsFit, ExactlyDeterminedSubsetHasZeroRss) {
  const Dataset data = test::random_dataset(10, 3, 1);
  const FitState fit = ols_fit(data, {0, 4, 7});
  EXPECT_NEAR(fit.rss, 0.0, 1e-20);
  EXPECT_EQ(fit.residuals.size(), 10);
}

TEST(OlsFit, RecoversExactModel) {
  Matrix X = test::random_dataset(12, 4, 2).X();
  Vector beta(4);
  beta << 1.5, -2.0, 0.25, 3.0;
  const Dataset data(X, X * beta);
  const FitState fit = ols_fit(data, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  EXPECT_LT((fit.beta - beta).norm(), 1e-12);
  EXPECT_NEAR(fit.rss, 0.0, 1e-20);
}

TEST(OlsFit, FivePointClosedForm) {
  Matrix X(5, 1);
  X << 1.0, 2.0, -1.0, 3.0, 0.5;
  Vector y(5);
  y << 2.1, 3.9, -2.2, 6.3, 0.9;
  // sum x y = 2.1 + 7.8 + 2.2 + 18.9 + 0.45 = 31.45, sum x^2 = 1 + 4 + 1 + 9 + 0.25 = 15.25
  const FitState fit = ols_fit(Dataset(X, y), {0, 1, 2, 3, 4});
  EXPECT_NEAR(fit.beta(0), 31.45 / 15.25, 1e-14);
}

TEST(OlsFit, RssCoversSubsetOnlyAndFactorMatchesGram) {
  const Dataset data = test::random_dataset(9, 2, 3);
  const IndexSet subset{1, 3, 5, 8};
  const FitState fit = ols_fit(data, subset);
  double rss = 0.0;
  for (Index i : subset) rss += fit.residuals(static_cast<Eigen::Index>(i)) * fit.residuals(static_cast<Eigen::Index>(i));
  EXPECT_NEAR(fit.rss, rss, 1e-12);
  EXPECT_EQ(fit.active, subset);
  const Matrix M = test::subset_gram(data, subset);
  EXPECT_LT((fit.chol * fit.chol.transpose() - M).norm(), 1e-10 * M.norm());
}

TEST(OlsFit, RankDeficientSubsetThrows) {
  Matrix X(4, 2);
  X << 1, 2, 2, 4, 3, 6, 1, 0;
  const Dataset data(X, Vector::Ones(4));
  EXPECT_THROW(ols_fit(data, {0, 1, 2}), RankDeficient);
  EXPECT_THROW(ols_fit(data, {0}), RankDeficient);
  EXPECT_NO_THROW(ols_fit(data, {0, 3}));
}

TEST(WlsValue, OnesGiveOlsRssAndZeroGivesZero) {
  const Dataset data = test::random_dataset(8, 3, 4);
  const FitState fit = ols_fit(data, {0, 1, 2, 3, 4, 5, 6, 7});
  EXPECT_NEAR(wls_value(data, Vector::Ones(8)), fit.rss, 1e-10);
  EXPECT_EQ(wls_value(data, Vector::Zero(8)), 0.0);
}

TEST(WlsValue, MatchesIndependentNormalEquations) {
  const Dataset data = test::random_dataset(6, 2, 5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Vector w(6);
    for (int k = 0; k < 6; ++k) w(k) = u(rng);
    // oracle: Householder QR on sqrt(w) X
    const Vector sw = w.cwiseSqrt();
    const Matrix A = sw.asDiagonal() * data.X();
    const Vector b = sw.asDiagonal() * data.y();
    const Vector beta = A.householderQr().solve(b);
    EXPECT_NEAR(wls_value(data, w), (b - A * beta).squaredNorm(), 1e-10);
  }
}

TEST(WlsValue, SingularWeightsStayFiniteAndNonNegative) {
  const Dataset data = test::random_dataset(6, 3, 7);
  Vector w = Vector::Zero(6);
  w(0) = 0.5;
  w(1) = 0.25;
  const double v = wls_value(data, w);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1e-6);
  EXPECT_LE(wls_infimum(data, w), v + 1e-12);
}

TEST(WlsValue, MonotoneAndConcave) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const Dataset data = test::random_dataset(7, 2, 100 + rep);
    Vector w1(7), w2(7);
    for (int k = 0; k < 7; ++k) {
      w1(k) = u(rng);
      w2(k) = u(rng);
    }
    const int j = rep % 7;
    Vector up = w1;
    up(j) = std::min(1.0, up(j) + 0.5);
    EXPECT_GE(wls_value(data, up), wls_value(data, w1) - 1e-10);
    const double lam = u(rng);
    EXPECT_GE(wls_value(data, lam * w1 + (1 - lam) * w2),
              lam * wls_value(data, w1) + (1 - lam) * wls_value(data, w2) - 1e-8);
  }
}

TEST(RssIncrement, ZeroForExactFitPoint) {
  Matrix X = test::random_dataset(6, 2, 9).X();
  Vector beta(2);
  beta << 1.0, -1.0;
  Vector y = X * beta;
  y(0) += 1.0;
  y(1) -= 2.0;
  const Dataset data(X, y);
  const FitState fit = ols_fit(data, {0, 1, 2, 3});
  // row 5 is not perturbed, but the fit is pulled by rows 0 and 1; use a clean subset instead
  const FitState clean = ols_fit(data, {2, 3, 4});
  EXPECT_NEAR(rss_increment(clean, data, 5), 0.0, 1e-20);
  EXPECT_GE(rss_increment(fit, data, 5), 0.0);
}

TEST(RssIncrement, EqualsRefitDifference) {
  for (int rep = 0; rep < 50; ++rep) {
    const Dataset data = test::random_dataset(8, 2, 200 + rep);
    const FitState fit = ols_fit(data, {0, 1, 2, 3});
    const Index j = 4 + static_cast<Index>(rep % 4);
    Vector w = Vector::Zero(8);
    for (Index k : fit.active) w(static_cast<Eigen::Index>(k)) = 1.0;
    const double before = wls_value(data, w);
    w(static_cast<Eigen::Index>(j)) = 1.0;
    EXPECT_NEAR(before + rss_increment(fit, data, j), wls_value(data, w), 1e-8 * (1.0 + wls_value(data, w)));
  }
}

TEST(RankOneAdd, AgreesWithRefit) {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 300; ++rep) {
    const Index n = 6 + rng() % 15, d = 1 + rng() % 5;
    const Dataset data = test::random_dataset(n, d, 300 + rep);
    IndexSet perm = test::permutation(n, rng);
    IndexSet base(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(d));
    const Index j = perm[d];
    const FitState fit = ols_fit(data, base);
    const FitState next = rank_one_add(fit, data, j);
    IndexSet all = base;
    all.push_back(j);
    const FitState ref = ols_fit(data, all);
    EXPECT_LT((next.beta - ref.beta).norm(), 1e-8 * (1.0 + ref.beta.norm()));
    EXPECT_NEAR(next.rss, ref.rss, 1e-8 * (1.0 + ref.rss));
    EXPECT_NEAR(next.rss, fit.rss + rss_increment(fit, data, j), 1e-8 * (1.0 + ref.rss));
    const Matrix M = next.chol * next.chol.transpose();
    const Matrix Mref = ref.chol * ref.chol.transpose();
    EXPECT_LT((M - Mref).norm(), 1e-8 * (1.0 + Mref.norm()));
    EXPECT_EQ(next.active, ref.active);
  }
}

TEST(RankOneAdd, DuplicateRowAddsOuterProduct) {
  Matrix X = test::random_dataset(5, 3, 11).X();
  X.row(4) = X.row(0);
  const Dataset data(X, Vector::LinSpaced(5, 0.0, 1.0));
  const FitState fit = ols_fit(data, {0, 1, 2, 3});
  const FitState next = rank_one_add(fit, data, 4);
  const Matrix diff = next.chol * next.chol.transpose() - fit.chol * fit.chol.transpose();
  const Vector x = X.row(0).transpose();
  EXPECT_LT((diff - x * x.transpose()).norm(), 1e-10 * (1.0 + x.squaredNorm()));
}

TEST(LtsObjective, HandSortedExample) {
  // design with beta = 0 so residuals equal y
  const Matrix X = Matrix::Ones(6, 1);
  Vector y(6);
  y << 3, 1, -2, 0, 5, -1;
  const Dataset data(X, y);
  EXPECT_DOUBLE_EQ(lts_objective(data, Vector::Zero(1), 3), 2.0);
  EXPECT_DOUBLE_EQ(lts_objective(data, Vector::Zero(1), 6), 40.0);
}

TEST(LtsObjective, ZeroWhenBetaFitsHPoints) {
  Matrix X = test::random_dataset(8, 2, 12).X();
  Vector beta(2);
  beta << 2.0, 1.0;
  Vector y = X * beta;
  y(0) += 10.0;
  y(1) -= 7.0;
  EXPECT_NEAR(lts_objective(Dataset(X, y), beta, 6), 0.0, 1e-20);
}

TEST(LtsObjective, BoundedBySubsetFits) {
  for (int rep = 0; rep < 30; ++rep) {
    const Dataset data = test::random_dataset(9, 2, 400 + rep);
    const FitState fit = ols_fit(data, {0, 2, 4, 6, 8});
    EXPECT_LE(lts_objective(data, fit.beta, 5), fit.rss + 1e-12);
  }
}

TEST(LtsObjective, RejectsBadCoverage) {
  const Dataset data = test::random_dataset(5, 1, 13);
  EXPECT_THROW(lts_objective(data, Vector::Zero(1), 0), InfeasibleConfig);
  EXPECT_THROW(lts_objective(data, Vector::Zero(1), 6), InfeasibleConfig);
}

TEST(OrderByAbsResidual, TiesBrokenByIndex) {
  Vector r(5);
  r << 1.0, -1.0, 0.5, 1.0, -0.5;
  EXPECT_EQ(order_by_abs_residual(r), (IndexSet{2, 4, 0, 1, 3}));
}
