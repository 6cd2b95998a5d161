#pragma once

#include "tcp/dataset.hpp"
#include "tcp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

namespace tcp {

/**
 * Interval of candidate responses y over which the lasso fit on the augmented
 * sample [Y; y] keeps the signed support (M, s). Inside it the n+1 residuals
 * are resid_offset - resid_slope * y.
 *
 * Rows of A: first p-|M| rows bound +X_j'r <= lambda for inactive j, next
 * p-|M| rows bound -X_j'r <= lambda, last |M| rows keep s_k beta_k > 0.
 */
struct SupportRegion {
  std::vector<Index> support;
  std::vector<int> signs;
  Matrix a;
  Vector b;
  double c_bound = -std::numeric_limits<double>::infinity();
  double d_bound = std::numeric_limits<double>::infinity();
  Vector resid_offset;
  Vector resid_slope;

  bool nonempty() const { return c_bound <= d_bound; }

  /// Strictly inside (c_bound, d_bound), away from both ends by `margin`.
  bool interior(double y, double margin) const { return y > c_bound + margin && y < d_bound - margin; }

  Vector residuals(double y) const { return resid_offset - resid_slope * y; }
};

/// Inactive columns, ascending.
inline std::vector<Index> complement_columns(Index p, const std::vector<Index>& support) {
  std::vector<bool> in(static_cast<std::size_t>(p), false);
  for (Index j : support) in[static_cast<std::size_t>(j)] = true;
  std::vector<Index> rest;
  rest.reserve(static_cast<std::size_t>(p) - support.size());
  for (Index j = 0; j < p; ++j)
    if (!in[static_cast<std::size_t>(j)]) rest.push_back(j);
  return rest;
}

namespace detail {

struct ActiveFactor {
  Matrix xm;                 // X_M
  Eigen::LLT<Matrix> gram;   // X_M' X_M
};

inline ActiveFactor factor_active(const Matrix& xfull, const std::vector<Index>& support) {
  ActiveFactor f{select_columns(xfull, support), {}};
  if (!support.empty()) {
    f.gram.compute(f.xm.transpose() * f.xm);
    if (f.gram.info() != Eigen::Success || f.gram.rcond() < kMinGramRcond)
      throw RankError("active-set Gram matrix is singular");
  }
  return f;
}

inline void check_signed_support(Index p, const std::vector<Index>& support, const std::vector<int>& signs) {
  if (support.size() != signs.size()) throw InputError("support and sign vector differ in length");
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (support[k] < 0 || support[k] >= p) throw InputError("support index out of range");
    if (k > 0 && support[k] <= support[k - 1]) throw InputError("support must be strictly ascending");
    if (signs[k] != 1 && signs[k] != -1) throw InputError("signs must be +1 or -1");
  }
}

}  // namespace detail

/**
 * Affine constraints A [Y; y] <= b characterizing the signed support (M, s):
 *   A0 = (1/lambda) [X_{-M}'(I - P_M); -X_{-M}'(I - P_M)]
 *   b0 = [1 - X_{-M}'(X_M')^+ s; 1 + X_{-M}'(X_M')^+ s]
 *   A1 = -diag(s) (X_M'X_M)^{-1} X_M'
 *   b1 = -lambda diag(s) (X_M'X_M)^{-1} s
 */
inline std::pair<Matrix, Vector> build_constraints(const Matrix& xfull, const std::vector<Index>& support,
                                                   const std::vector<int>& signs, double lambda) {
  if (!(lambda > 0.0)) throw InputError("constraints need lambda > 0");
  const Index p = xfull.cols();
  const Index rows = xfull.rows();
  detail::check_signed_support(p, support, signs);
  const auto inactive = complement_columns(p, support);
  const auto m = static_cast<Index>(support.size());
  const auto k = static_cast<Index>(inactive.size());

  const auto f = detail::factor_active(xfull, support);
  const Matrix xi = select_columns(xfull, inactive);
  const Vector s = sign_vector(signs);

  Matrix proj_resid = xi.transpose();  // X_{-M}'(I - P_M)
  Vector corr_s = Vector::Zero(k);     // X_{-M}'(X_M')^+ s
  Matrix pinv;                         // X_M^+ = (X_M'X_M)^{-1} X_M'
  Vector gs;                           // (X_M'X_M)^{-1} s
  if (m > 0) {
    pinv = f.gram.solve(f.xm.transpose());
    gs = f.gram.solve(s);
    const Matrix cross = xi.transpose() * f.xm;
    proj_resid.noalias() -= cross * pinv;
    corr_s = cross * gs;
  }

  Matrix a(2 * k + m, rows);
  Vector b(2 * k + m);
  a.topRows(k) = proj_resid / lambda;
  a.middleRows(k, k) = -proj_resid / lambda;
  b.head(k) = Vector::Ones(k) - corr_s;
  b.segment(k, k) = Vector::Ones(k) + corr_s;
  if (m > 0) {
    a.bottomRows(m) = -(s.asDiagonal() * pinv);
    b.tail(m) = -lambda * (s.asDiagonal() * gs);
  }
  return {std::move(a), std::move(b)};
}

/**
 * Range of the last coordinate y keeping A [Y; y] <= b:
 * c = max over rows with A_{i,n+1} < 0, d = min over rows with A_{i,n+1} > 0
 * of (b_i - A_{i,1:n} Y) / A_{i,n+1}. A violated row that does not involve y
 * makes the region empty, reported as c > d.
 */
inline std::pair<double, double> region_bounds(const Matrix& a, const Vector& b, const Vector& y) {
  if (a.cols() != y.size() + 1) throw InputError("constraint matrix needs n+1 columns");
  const Index n = y.size();
  const Vector slack = b - a.leftCols(n) * y;
  double c = -std::numeric_limits<double>::infinity();
  double d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < a.rows(); ++i) {
    const double coef = a(i, n);
    if (coef < 0.0) {
      c = std::max(c, slack(i) / coef);
    } else if (coef > 0.0) {
      d = std::min(d, slack(i) / coef);
    } else if (slack(i) < 0.0) {
      return {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    }
  }
  return {c, d};
}

/**
 * Residuals of the closed-form active-set solution as an affine function of y:
 * r(y) = resid_offset - resid_slope * y, where resid_offset is the residual at
 * y = 0 and resid_slope = -(I - P_M) e_{n+1}.
 */
inline std::pair<Vector, Vector> residual_linearization(const Matrix& xfull, const Vector& y,
                                                        const std::vector<Index>& support,
                                                        const std::vector<int>& signs, double lambda) {
  const Index rows = xfull.rows();
  if (y.size() + 1 != rows) throw InputError("response must have n entries for an (n+1)-row design");
  detail::check_signed_support(xfull.cols(), support, signs);
  const auto f = detail::factor_active(xfull, support);
  Vector y0 = Vector::Zero(rows);
  y0.head(rows - 1) = y;
  Vector e = Vector::Zero(rows);
  e(rows - 1) = 1.0;
  Vector offset = y0;
  Vector slope = -e;
  if (!support.empty()) {
    const Vector beta0 = f.gram.solve(f.xm.transpose() * y0 - lambda * sign_vector(signs));
    offset.noalias() -= f.xm * beta0;
    slope.noalias() += f.xm * f.gram.solve(f.xm.transpose() * e);
  }
  return {std::move(offset), std::move(slope)};
}

inline SupportRegion build_region(const Matrix& xfull, const Vector& y, const std::vector<Index>& support,
                                  const std::vector<int>& signs, double lambda) {
  SupportRegion r;
  r.support = support;
  r.signs = signs;
  std::tie(r.a, r.b) = build_constraints(xfull, support, signs, lambda);
  std::tie(r.c_bound, r.d_bound) = region_bounds(r.a, r.b, y);
  std::tie(r.resid_offset, r.resid_slope) = residual_linearization(xfull, y, support, signs, lambda);
  return r;
}

struct ScanStats {
  long full_solves = 0;       // calls into the coordinate-descent solver
  long shortcut_updates = 0;  // single-violation support updates accepted
  long region_evals = 0;      // grid points answered by a region's linearization
  long boundary_refits = 0;   // refits forced by a point on a region boundary
  long regions_built = 0;
  long region_failures = 0;   // region construction rejected (rank / validation)
};

struct ScanOptions {
  LassoOptions lasso{};
  double boundary_margin = 1e-10;  // relative to max(1, |y|)
  bool use_shortcut = true;
  bool use_regions = true;
};

namespace detail {

inline bool signs_match(const Vector& beta, const std::vector<Index>& support, const std::vector<int>& signs) {
  Index nonzero = 0;
  for (Index j = 0; j < beta.size(); ++j)
    if (std::abs(beta(j)) > kSupportThreshold) ++nonzero;
  if (nonzero != static_cast<Index>(support.size())) return false;
  for (std::size_t k = 0; k < support.size(); ++k) {
    const double v = beta(support[k]);
    if (std::abs(v) <= kSupportThreshold || (v > 0 ? 1 : -1) != signs[k]) return false;
  }
  return true;
}

// Signed support after crossing the single violated constraint `row`.
inline std::pair<std::vector<Index>, std::vector<int>> step_support(const SupportRegion& region, Index p, Index row) {
  const auto inactive = complement_columns(p, region.support);
  const auto k = static_cast<Index>(inactive.size());
  std::vector<Index> support = region.support;
  std::vector<int> signs = region.signs;
  if (row < 2 * k) {
    const Index j = inactive[static_cast<std::size_t>(row % k)];
    const int sign = row < k ? 1 : -1;
    auto pos = std::lower_bound(support.begin(), support.end(), j);
    const auto off = pos - support.begin();
    support.insert(pos, j);
    signs.insert(signs.begin() + off, sign);
  } else {
    const auto off = static_cast<std::ptrdiff_t>(row - 2 * k);
    support.erase(support.begin() + off);
    signs.erase(signs.begin() + off);
  }
  return {std::move(support), std::move(signs)};
}

inline double kkt_tolerance(const Matrix& xfull, const Vector& yfull, double lambda) {
  return 1e-8 * (1.0 + lambda) + 1e-11 * xfull.colwise().norm().maxCoeff() * yfull.norm();
}

}  // namespace detail

/// Visitor receives (grid point, absolute residuals of length n+1).
using ScanVisitor = std::function<void(double, const Vector&)>;

/**
 * Lasso residuals on the augmented sample at every candidate y, walking the
 * points in the given (ascending) order.
 *
 * A point strictly inside the current signed-support region is answered by
 * the region's residual linearization. Otherwise the fit is recomputed: when
 * exactly one region constraint is violated the support is stepped across it
 * and solved in closed form (kept only if it passes a KKT check), else the
 * coordinate-descent solver runs warm-started from the previous fit. A new
 * region is then built around the refit point.
 */
inline ScanStats region_scan(const Dataset& data, const Vector& x_new, double lambda,
                             std::span<const double> points, const ScanVisitor& visit,
                             const ScanOptions& opts = {}) {
  if (!(lambda >= 0.0)) throw InputError("lambda must be >= 0");
  const Matrix xfull = stack_rows(data.x(), x_new);
  const Index n = data.n();
  const Index p = data.p();
  ScanStats stats;
  std::optional<SupportRegion> region;
  std::optional<Vector> previous_beta;
  Vector yfull(n + 1);
  yfull.head(n) = data.y();
  const bool regions_enabled = opts.use_regions && lambda > 0.0;

  for (const double y : points) {
    const double margin = opts.boundary_margin * std::max(1.0, std::abs(y));
    if (region && region->interior(y, margin)) {
      ++stats.region_evals;
      visit(y, region->residuals(y).cwiseAbs());
      continue;
    }
    const bool on_boundary = region && region->nonempty() && y >= region->c_bound - margin &&
                             y <= region->d_bound + margin;
    yfull(n) = y;

    Vector beta;
    std::vector<Index> support;
    std::vector<int> signs;
    bool solved = false;
    if (region && !on_boundary && opts.use_shortcut) {
      const Vector excess = region->a * yfull - region->b;
      Index violated = -1;
      Index count = 0;
      for (Index i = 0; i < excess.size(); ++i) {
        if (excess(i) > 0.0) {
          ++count;
          violated = i;
        }
      }
      if (count == 1) {
        std::tie(support, signs) = detail::step_support(*region, p, violated);
        try {
          beta = lasso_on_support(xfull, yfull, support, signs, lambda);
          solved = detail::signs_match(beta, support, signs) &&
                   kkt_check(xfull, yfull, beta, lambda, detail::kkt_tolerance(xfull, yfull, lambda));
        } catch (const RankError&) {
          solved = false;
        }
        if (solved) ++stats.shortcut_updates;
      }
    }
    if (!solved) {
      LassoOptions lo = opts.lasso;
      if (previous_beta) lo.warm_start = previous_beta;
      LassoFit fit;
      try {
        fit = lasso_fit(xfull, yfull, lambda, lo);
      } catch (const std::exception& e) {
        throw GridPointError(y, e.what());
      }
      ++stats.full_solves;
      if (on_boundary) ++stats.boundary_refits;
      beta = std::move(fit.beta);
      support = std::move(fit.support);
      signs = std::move(fit.signs);
    }

    visit(y, (yfull - xfull * beta).cwiseAbs());
    previous_beta = beta;

    region.reset();
    if (!regions_enabled) continue;
    try {
      SupportRegion r = build_region(xfull, data.y(), support, signs, lambda);
      const double tol = 1e-8 * std::max(1.0, std::abs(y));
      if (r.nonempty() && y >= r.c_bound - tol && y <= r.d_bound + tol) {
        region = std::move(r);
        ++stats.regions_built;
      } else {
        ++stats.region_failures;
      }
    } catch (const RankError&) {
      ++stats.region_failures;
    }
  }
  return stats;
}

struct ScanResult {
  std::vector<double> points;
  std::vector<Vector> abs_residuals;
  ScanStats stats;
};

inline ScanResult region_scan(const Dataset& data, const Vector& x_new, double lambda,
                              std::span<const double> points, const ScanOptions& opts = {}) {
  ScanResult out;
  out.points.reserve(points.size());
  out.abs_residuals.reserve(points.size());
  out.stats = region_scan(
      data, x_new, lambda, points,
      [&](double y, const Vector& r) {
        out.points.push_back(y);
        out.abs_residuals.push_back(r);
      },
      opts);
  return out;
}

}  // namespace tcp
