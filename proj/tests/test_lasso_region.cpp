#include "oracles.hpp"
#include "tcp/lasso_region.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace tcp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Fixture {
  oracle::Instance inst;
  double lambda;
};

Fixture random_fixture(std::mt19937_64& rng, Index n, Index p) {
  auto inst = oracle::sparse_instance(n, p, 3, 2.0, rng);
  const double lam = 0.3 * std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(p)));
  return {std::move(inst), lam};
}

LassoFit refit(const Fixture& f, double y) {
  const Dataset aug = f.inst.data.augmented(f.inst.x_new, y);
  LassoOptions o;
  o.tol = 1e-10;
  return lasso_fit(aug.x(), aug.y(), f.lambda, o);
}

Vector naive_abs_residuals(const Fixture& f, double y) {
  const Dataset aug = f.inst.data.augmented(f.inst.x_new, y);
  return (aug.y() - aug.x() * refit(f, y).beta).cwiseAbs();
}

}  // namespace

TEST(Constraints, EmptySupportIsInactiveConditionsOnly) {
  std::mt19937_64 rng(71);
  const Matrix x = oracle::gaussian_matrix(6, 4, rng);
  const auto [a, b] = build_constraints(x, {}, {}, 2.0);
  ASSERT_EQ(a.rows(), 8);
  EXPECT_LE((a.topRows(4) - x.transpose() / 2.0).norm(), 1e-15);
  EXPECT_LE((a.bottomRows(4) + x.transpose() / 2.0).norm(), 1e-15);
  EXPECT_TRUE((b.array() == 1.0).all());
}

TEST(Constraints, HoldAtFittedResponse) {
  std::mt19937_64 rng(72);
  for (int rep = 0; rep < 30; ++rep) {
    const Matrix x = oracle::gaussian_matrix(10, 4, rng);
    const Vector y = 2 * x.col(0) - x.col(2) + oracle::gaussian_vector(10, rng);
    const LassoFit f = lasso_fit(x, y, 1.5);
    const auto [a, b] = build_constraints(x, f.support, f.signs, 1.5);
    EXPECT_EQ(a.rows(), 2 * (4 - static_cast<Index>(f.support.size())) + static_cast<Index>(f.support.size()));
    EXPECT_LE((a * y - b).maxCoeff(), 1e-8);
  }
}

TEST(Constraints, CrossingZeroViolatesSignRow) {
  std::mt19937_64 rng(73);
  const Matrix x = oracle::gaussian_matrix(12, 4, rng);
  const Vector y = 3 * x.col(0) - 3 * x.col(1) + 0.2 * oracle::gaussian_vector(12, rng);
  const LassoFit f = lasso_fit(x, y, 1.0);
  ASSERT_GE(f.support.size(), 2u);
  const auto [a, b] = build_constraints(x, f.support, f.signs, 1.0);
  const Index inactive = 4 - static_cast<Index>(f.support.size());
  // Moving Y along X_M e_k shifts only beta_k; push it past zero to the opposite sign.
  const std::size_t k = 0;
  const Matrix xm = select_columns(x, f.support);
  const double shift = f.beta(f.support[k]) + f.signs[k] * 1.0;
  const Vector y2 = y - shift * xm.col(static_cast<Index>(k));
  const Vector excess = a * y2 - b;
  EXPECT_GT(excess(2 * inactive + static_cast<Index>(k)), 0.0);
  for (std::size_t j = 1; j < f.support.size(); ++j) EXPECT_LE(excess(2 * inactive + static_cast<Index>(j)), 1e-9);
}

TEST(RegionBounds, Examples) {
  Matrix a(1, 3);
  a << 0, 0, 1;
  auto [c, d] = region_bounds(a, Vector::Constant(1, 5.0), Vector::Zero(2));
  EXPECT_EQ(c, -kInf);
  EXPECT_EQ(d, 5.0);

  Matrix a2(2, 2);
  a2 << 0, -1, 0, 1;
  std::tie(c, d) = region_bounds(a2, (Vector(2) << -1, 3).finished(), Vector::Zero(1));
  EXPECT_EQ(c, 1.0);
  EXPECT_EQ(d, 3.0);

  Matrix a3(1, 2);
  a3 << 1, 0;
  std::tie(c, d) = region_bounds(a3, Vector::Constant(1, 0.5), Vector::Ones(1));
  EXPECT_GT(c, d);
}

TEST(Linearization, EmptySupportGivesRawResponse) {
  const Matrix x = Matrix::Ones(4, 2);
  const Vector y = (Vector(3) << 1, -2, 3).finished();
  const auto [off, slope] = residual_linearization(x, y, {}, {}, 1.0);
  EXPECT_EQ(off, (Vector(4) << 1, -2, 3, 0).finished());
  EXPECT_EQ(slope, (Vector(4) << 0, 0, 0, -1).finished());
  const Vector r = (off - slope * 2.5).cwiseAbs();
  EXPECT_EQ(r, (Vector(4) << 1, 2, 3, 2.5).finished());
}

TEST(Linearization, MatchesRefitsInsideRegion) {
  std::mt19937_64 rng(74);
  for (int rep = 0; rep < 20; ++rep) {
    const auto f = random_fixture(rng, 15, 25);
    const double y0 = f.inst.y_new;
    const LassoFit fit = refit(f, y0);
    const Matrix xfull = stack_rows(f.inst.data.x(), f.inst.x_new);
    SupportRegion r;
    try {
      r = build_region(xfull, f.inst.data.y(), fit.support, fit.signs, f.lambda);
    } catch (const RankError&) {
      continue;
    }
    ASSERT_LE(r.c_bound, y0 + 1e-8);
    ASSERT_GE(r.d_bound, y0 - 1e-8);
    const double lo = std::max(r.c_bound, y0 - 50), hi = std::min(r.d_bound, y0 + 50);
    for (double t : {0.1, 0.5, 0.9}) {
      const double y = lo + t * (hi - lo);
      EXPECT_LE((r.residuals(y).cwiseAbs() - naive_abs_residuals(f, y)).lpNorm<Eigen::Infinity>(), 1e-6);
    }
    // Midpoint satisfies A [Y; y] <= b.
    Vector yfull(16);
    yfull << f.inst.data.y(), 0.5 * (lo + hi);
    EXPECT_LE((r.a * yfull - r.b).maxCoeff(), 1e-8);
    const Index last = 15;
    if (r.resid_slope(last) != 0.0)
      EXPECT_NEAR(r.residuals(r.resid_offset(last) / r.resid_slope(last))(last), 0.0, 1e-9);
  }
}

TEST(Region, GridInsideSharesSupportAndOutsideDiffers) {
  std::mt19937_64 rng(75);
  int checked = 0;
  for (int rep = 0; rep < 25; ++rep) {
    const auto f = random_fixture(rng, 12, 20);
    const LassoFit fit = refit(f, f.inst.y_new);
    const Matrix xfull = stack_rows(f.inst.data.x(), f.inst.x_new);
    const SupportRegion r = build_region(xfull, f.inst.data.y(), fit.support, fit.signs, f.lambda);
    if (!std::isfinite(r.c_bound) || !std::isfinite(r.d_bound) || r.d_bound - r.c_bound < 1e-3) continue;
    ++checked;
    const double w = r.d_bound - r.c_bound;
    for (int i = 1; i < 20; ++i) {
      const LassoFit g = refit(f, r.c_bound + w * i / 20.0);
      EXPECT_EQ(g.support, fit.support);
      EXPECT_EQ(g.signs, fit.signs);
    }
    const double eps = 1e-3 * std::max(1.0, w);
    for (double y : {r.c_bound - eps, r.d_bound + eps}) {
      const LassoFit g = refit(f, y);
      EXPECT_TRUE(g.support != fit.support || g.signs != fit.signs) << "y=" << y;
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(RegionScan, SingleRegionNeedsOneSolve) {
  std::mt19937_64 rng(76);
  int checked = 0;
  for (int rep = 0; rep < 20 && checked < 5; ++rep) {
    const auto f = random_fixture(rng, 15, 25);
    const LassoFit fit = refit(f, f.inst.y_new);
    const Matrix xfull = stack_rows(f.inst.data.x(), f.inst.x_new);
    const SupportRegion r = build_region(xfull, f.inst.data.y(), fit.support, fit.signs, f.lambda);
    const double lo = std::max(r.c_bound, f.inst.y_new - 5), hi = std::min(r.d_bound, f.inst.y_new + 5);
    if (hi - lo < 0.1) continue;
    ++checked;
    const auto pts = CandidateGrid::with_count(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo), 200).points();
    const ScanResult s = region_scan(f.inst.data, f.inst.x_new, f.lambda, pts);
    EXPECT_EQ(s.stats.full_solves, 1);
    EXPECT_EQ(s.stats.region_evals, static_cast<long>(pts.size()) - 1);
  }
  EXPECT_EQ(checked, 5);
}

TEST(RegionScan, MatchesNaiveRefitsAndBookkeeping) {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 12; ++rep) {
    const auto f = random_fixture(rng, 10 + rep % 8, 12 + (rep * 5) % 18);
    const auto pts = CandidateGrid::with_count(f.inst.y_new - 15, f.inst.y_new + 15, 240).points();
    const ScanResult s = region_scan(f.inst.data, f.inst.x_new, f.lambda, pts);
    ASSERT_EQ(s.points.size(), pts.size());
    long runs = 0;
    std::pair<std::vector<Index>, std::vector<int>> prev;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const LassoFit g = refit(f, pts[i]);
      const Dataset aug = f.inst.data.augmented(f.inst.x_new, pts[i]);
      const Vector naive = (aug.y() - aug.x() * g.beta).cwiseAbs();
      EXPECT_LE((s.abs_residuals[i] - naive).lpNorm<Eigen::Infinity>(), 1e-6) << "rep " << rep << " y=" << pts[i];
      std::pair cur{g.support, g.signs};
      if (i == 0 || cur != prev) ++runs;
      prev = std::move(cur);
    }
    EXPECT_LE(s.stats.full_solves + s.stats.shortcut_updates,
              runs + s.stats.boundary_refits + s.stats.region_failures);
    EXPECT_EQ(s.stats.full_solves + s.stats.shortcut_updates + s.stats.region_evals, static_cast<long>(pts.size()));
  }
}

TEST(RegionScan, ShortcutAndFullSolverAgree) {
  std::mt19937_64 rng(78);
  for (int rep = 0; rep < 6; ++rep) {
    const auto f = random_fixture(rng, 15, 20);
    const auto pts = CandidateGrid::with_count(f.inst.y_new - 20, f.inst.y_new + 20, 300).points();
    ScanOptions no_shortcut;
    no_shortcut.use_shortcut = false;
    const ScanResult a = region_scan(f.inst.data, f.inst.x_new, f.lambda, pts);
    const ScanResult b = region_scan(f.inst.data, f.inst.x_new, f.lambda, pts, no_shortcut);
    for (std::size_t i = 0; i < pts.size(); ++i)
      EXPECT_LE((a.abs_residuals[i] - b.abs_residuals[i]).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_EQ(b.stats.shortcut_updates, 0);
  }
}

TEST(RegionScan, ChunkedScansAgreeWithSequential) {
  std::mt19937_64 rng(79);
  const auto f = random_fixture(rng, 14, 22);
  const auto pts = CandidateGrid::with_count(f.inst.y_new - 10, f.inst.y_new + 10, 300).points();
  const ScanResult whole = region_scan(f.inst.data, f.inst.x_new, f.lambda, pts);
  const std::size_t cut = 137;
  const std::span<const double> all(pts);
  const ScanResult left = region_scan(f.inst.data, f.inst.x_new, f.lambda, all.first(cut));
  const ScanResult right = region_scan(f.inst.data, f.inst.x_new, f.lambda, all.subspan(cut));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vector& r = i < cut ? left.abs_residuals[i] : right.abs_residuals[i - cut];
    EXPECT_LE((whole.abs_residuals[i] - r).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(RegionScan, DeterministicAcrossRuns) {
  std::mt19937_64 rng(80);
  const auto f = random_fixture(rng, 14, 22);
  const auto pts = CandidateGrid::with_count(f.inst.y_new - 10, f.inst.y_new + 10, 200).points();
  const ScanResult a = region_scan(f.inst.data, f.inst.x_new, f.lambda, pts);
  const ScanResult b = region_scan(f.inst.data, f.inst.x_new, f.lambda, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_TRUE((a.abs_residuals[i].array() == b.abs_residuals[i].array()).all());
}

TEST(RegionScan, ZeroPenaltyRefitsEveryPoint) {
  std::mt19937_64 rng(81);
  const auto inst = oracle::sparse_instance(20, 4, 2, 1.0, rng);
  const auto pts = CandidateGrid::with_count(-2, 2, 10).points();
  const ScanResult s = region_scan(inst.data, inst.x_new, 0.0, pts);
  EXPECT_EQ(s.stats.full_solves, static_cast<long>(pts.size()));
  EXPECT_EQ(s.stats.regions_built, 0);
}
