#include "oracles.hpp"
#include "tcp/solvers.hpp"

#include <gtest/gtest.h>

using namespace tcp;

TEST(Ridge, IdentityDesignHalvesResponse) {
  const Matrix x = Matrix::Identity(2, 2);
  const Vector y = (Vector(2) << 3, 4).finished();
  const RidgeFit f = ridge_fit(x, y, 1.0);
  EXPECT_NEAR(f.beta(0), 1.5, 1e-14);
  EXPECT_NEAR(f.beta(1), 2.0, 1e-14);
}

TEST(Ridge, HugePenaltyShrinksToZero) {
  const Matrix x = (Matrix(2, 1) << 1, 2).finished();
  const Vector y = (Vector(2) << 1, 2).finished();
  EXPECT_LT(ridge_fit(x, y, 1e12).beta.norm(), 1e-11);
}

TEST(Ridge, KernelFormMatchesNormalEquations) {
  std::mt19937_64 rng(11);
  const Matrix x = oracle::gaussian_matrix(10, 20, rng);
  const Vector y = oracle::gaussian_vector(10, rng);
  const Vector want = oracle::ridge_normal_equations(x, y, 0.7);
  const Vector got = ridge_fit(x, y, 0.7).beta;
  EXPECT_LE((got - want).norm(), 1e-8 * want.norm());
}

TEST(Ridge, PrimalFormMatchesNormalEquations) {
  std::mt19937_64 rng(12);
  const Matrix x = oracle::gaussian_matrix(30, 6, rng);
  const Vector y = oracle::gaussian_vector(30, rng);
  const Vector want = oracle::ridge_normal_equations(x, y, 2.5);
  EXPECT_LE((ridge_fit(x, y, 2.5).beta - want).norm(), 1e-10 * want.norm());
}

TEST(Ridge, NormShrinksAlongPenaltyLadder) {
  std::mt19937_64 rng(13);
  const Matrix x = oracle::gaussian_matrix(15, 25, rng);
  const Vector y = oracle::gaussian_vector(15, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double norm = ridge_fit(x, y, rho).beta.norm();
    EXPECT_LT(norm, prev) << "rho=" << rho;
    prev = norm;
  }
}

TEST(Ridge, RejectsBadInput) {
  const Matrix x = Matrix::Identity(2, 2);
  Vector y = Vector::Ones(2);
  EXPECT_THROW(ridge_fit(x, y, 0.0), InputError);
  y(0) = std::nan("");
  EXPECT_THROW(ridge_fit(x, y, 1.0), InputError);
}

TEST(Lasso, ZeroPenaltyIsLeastSquares) {
  std::mt19937_64 rng(21);
  const Matrix x = oracle::gaussian_matrix(40, 5, rng);
  const Vector y = oracle::gaussian_vector(40, rng);
  const Vector ls = x.colPivHouseholderQr().solve(y);
  LassoOptions o;
  o.tol = 1e-12;
  EXPECT_LE((lasso_fit(x, y, 0.0, o).beta - ls).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Lasso, CriticalPenaltyGivesExactZero) {
  std::mt19937_64 rng(22);
  const Matrix x = oracle::gaussian_matrix(20, 8, rng);
  const Vector y = oracle::gaussian_vector(20, rng);
  const double lmax = (x.transpose() * y).lpNorm<Eigen::Infinity>();
  for (double lam : {lmax, 1.5 * lmax, 10 * lmax}) {
    const LassoFit f = lasso_fit(x, y, lam);
    EXPECT_TRUE((f.beta.array() == 0.0).all());
    EXPECT_TRUE(f.support.empty());
  }
}

TEST(Lasso, MatchesProximalGradientOracle) {
  std::mt19937_64 rng(23);
  const Matrix x = oracle::gaussian_matrix(20, 5, rng);
  const Vector y = x.col(0) * 2.0 + oracle::gaussian_vector(20, rng);
  const LassoFit f = lasso_fit(x, y, 1.0);
  const Vector ref = oracle::lasso_fista(x, y, 1.0);
  EXPECT_NEAR(f.objective, oracle::lasso_objective(x, y, ref, 1.0), 1e-6);
  EXPECT_NEAR(f.objective, oracle::lasso_objective(x, y, f.beta, 1.0), 1e-12);
}

TEST(Lasso, ObjectiveNeverIncreasesAcrossSweeps) {
  std::mt19937_64 rng(24);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = oracle::gaussian_matrix(15, 30, rng);
    const Vector y = x.leftCols(3).rowwise().sum() + oracle::gaussian_vector(15, rng);
    LassoOptions o;
    o.record_trace = true;
    o.polish = false;
    const LassoFit f = lasso_fit(x, y, 2.0, o);
    ASSERT_FALSE(f.objective_trace.empty());
    for (std::size_t s = 1; s < f.objective_trace.size(); ++s)
      EXPECT_LE(f.objective_trace[s], f.objective_trace[s - 1] * (1 + 1e-14) + 1e-14);
  }
}

TEST(Lasso, EveryFitPassesKktAtTenTimesTol) {
  std::mt19937_64 rng(25);
  for (int rep = 0; rep < 40; ++rep) {
    const Index n = 8 + rep % 13, p = 4 + (rep * 7) % 30;
    const Matrix x = oracle::gaussian_matrix(n, p, rng);
    const Vector y = oracle::gaussian_vector(n, rng) * 3.0;
    const double lam = 0.05 + 0.4 * (rep % 5) * (x.transpose() * y).lpNorm<Eigen::Infinity>() / 5.0;
    const LassoFit f = lasso_fit(x, y, lam);
    // A coefficient step of tol moves X_j'r by up to ||X_j||^2 tol.
    const double scale = std::max(1.0, x.colwise().squaredNorm().maxCoeff());
    EXPECT_TRUE(kkt_check(x, y, f.beta, lam, 10 * 1e-7 * scale)) << "rep " << rep;
  }
}

TEST(Lasso, SupportAndSignsMatchCoefficients) {
  std::mt19937_64 rng(26);
  const Matrix x = oracle::gaussian_matrix(30, 10, rng);
  const Vector y = 3 * x.col(2) - 2 * x.col(7) + oracle::gaussian_vector(30, rng);
  const LassoFit f = lasso_fit(x, y, 5.0);
  ASSERT_EQ(f.support.size(), f.signs.size());
  Index nonzero = 0;
  for (Index j = 0; j < f.beta.size(); ++j) nonzero += std::abs(f.beta(j)) > kSupportThreshold;
  EXPECT_EQ(nonzero, static_cast<Index>(f.support.size()));
  for (std::size_t k = 0; k < f.support.size(); ++k) EXPECT_EQ(f.signs[k], f.beta(f.support[k]) > 0 ? 1 : -1);
  EXPECT_TRUE(std::is_sorted(f.support.begin(), f.support.end()));
}

TEST(Lasso, WarmStartReachesSameSolution) {
  std::mt19937_64 rng(27);
  const Matrix x = oracle::gaussian_matrix(25, 40, rng);
  const Vector y = x.leftCols(4).rowwise().sum() + oracle::gaussian_vector(25, rng);
  const LassoFit cold = lasso_fit(x, y, 3.0);
  LassoOptions o;
  o.warm_start = oracle::gaussian_vector(40, rng);
  const LassoFit warm = lasso_fit(x, y, 3.0, o);
  EXPECT_NEAR(cold.objective, warm.objective, 1e-8);
}

TEST(Lasso, SweepBudgetRaisesWithLastIterate) {
  std::mt19937_64 rng(28);
  const Matrix x = oracle::gaussian_matrix(20, 30, rng);
  const Vector y = oracle::gaussian_vector(20, rng) * 5.0;
  LassoOptions o;
  o.max_iter = 1;
  o.tol = 1e-15;
  try {
    lasso_fit(x, y, 0.1, o);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.last_iterate().beta.size(), 30);
    EXPECT_GE(e.last_iterate().sweeps, 1);
  }
}

TEST(Lasso, RejectsNegativePenalty) {
  EXPECT_THROW(lasso_fit(Matrix::Identity(2, 2), Vector::Ones(2), -1.0), InputError);
}

TEST(Kkt, ZeroIsStationaryAboveCriticalPenalty) {
  std::mt19937_64 rng(31);
  const Matrix x = oracle::gaussian_matrix(10, 6, rng);
  const Vector y = oracle::gaussian_vector(10, rng);
  const double lmax = (x.transpose() * y).lpNorm<Eigen::Infinity>();
  EXPECT_TRUE(kkt_check(x, y, Vector::Zero(6), lmax, 0.0));
  EXPECT_FALSE(kkt_check(x, y, Vector::Zero(6), 0.5 * lmax, 1e-9));
}

TEST(Kkt, ConvergedFitPassesAndPerturbedFails) {
  std::mt19937_64 rng(32);
  const Matrix x = oracle::gaussian_matrix(30, 12, rng);
  const Vector y = 2 * x.col(0) + 2 * x.col(5) + oracle::gaussian_vector(30, rng);
  const Dataset d(x, y);
  LassoFit f = lasso_fit(d, 4.0);
  ASSERT_FALSE(f.support.empty());
  EXPECT_TRUE(kkt_check(d, f, 1e-4));
  f.beta(f.support.front()) += 1.0;
  EXPECT_FALSE(kkt_check(d, f, 1e-4));
}

TEST(Lasso, OnSupportClosedFormSolvesStationarity) {
  std::mt19937_64 rng(33);
  const Matrix x = oracle::gaussian_matrix(20, 6, rng);
  const Vector y = 3 * x.col(1) - 3 * x.col(4) + 0.1 * oracle::gaussian_vector(20, rng);
  const Vector b = lasso_on_support(x, y, {1, 4}, {1, -1}, 2.0);
  const Vector corr = x.transpose() * (y - x * b);
  EXPECT_NEAR(corr(1), 2.0, 1e-10);
  EXPECT_NEAR(corr(4), -2.0, 1e-10);
}

TEST(Lasso, OnSupportRejectsSingularGram) {
  Matrix x(4, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4;
  EXPECT_THROW(lasso_on_support(x, Vector::Ones(4), {0, 1}, {1, 1}, 0.1), RankError);
}
