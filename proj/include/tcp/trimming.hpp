#pragma once

#include "tcp/conformal.hpp"
#include "tcp/dataset.hpp"
#include "tcp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tcp {

enum class TrimMethod { MaxTrim, RidgeTrim, SplitTrim };

inline std::string_view to_string(TrimMethod m) {
  switch (m) {
    case TrimMethod::MaxTrim: return "MaxTrim";
    case TrimMethod::RidgeTrim: return "RidgeTrim";
    case TrimMethod::SplitTrim: return "SplitTrim";
  }
  return "?";
}

inline std::optional<TrimMethod> parse_trim_method(std::string_view s) {
  if (s == "MaxTrim") return TrimMethod::MaxTrim;
  if (s == "RidgeTrim") return TrimMethod::RidgeTrim;
  if (s == "SplitTrim") return TrimMethod::SplitTrim;
  return std::nullopt;
}

struct TrimSet {
  Interval interval;
  TrimMethod method = TrimMethod::MaxTrim;
  double alpha_trim = 0.0;
  double width() const { return interval.length(); }
};

/// The trimming level cannot bound the candidate range.
class UnboundedTrimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// [-y_max, y_max] with y_max = max |Y_i|; the level is 1/(n+1) by construction.
inline TrimSet max_trim(const Dataset& data) {
  const double y_max = data.y().cwiseAbs().maxCoeff();
  return {{-y_max, y_max}, TrimMethod::MaxTrim, 1.0 / static_cast<double>(data.n() + 1)};
}

/**
 * Ridge residuals on the augmented sample are affine in the candidate y:
 * r(y) = u + v y, with u = (I - H)[Y; 0], v = (I - H) e_{n+1} and H the
 * ridge hat matrix of the stacked (n+1) x p design.
 */
struct RidgeTrimWork {
  Vector u;
  Vector v;
  double y_star = 0.0;
  // Per training row: smaller and larger crossing of |r_{n+1}(y)| = |r_i(y)|.
  std::vector<std::pair<double, double>> per_i_bounds;
};

namespace detail {

// (I - H) applied to the columns of `rhs`, with H = X (X'X + rho I)^{-1} X'.
inline Matrix ridge_annihilate(const Matrix& xfull, const Matrix& rhs, double rho) {
  const Index rows = xfull.rows();
  if (xfull.cols() > rows) {
    // I - H = rho (XX' + rho I)^{-1}
    Matrix k = xfull * xfull.transpose();
    k.diagonal().array() += rho;
    return rho * k.llt().solve(rhs);
  }
  Matrix g = xfull.transpose() * xfull;
  g.diagonal().array() += rho;
  return rhs - xfull * g.llt().solve(xfull.transpose() * rhs);
}

inline double crossing(double num, double den) {
  if (den == 0.0) {
    if (num == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return num / den;
}

}  // namespace detail

inline RidgeTrimWork ridge_trim_work(const Dataset& data, const Vector& x_new, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("rho must be positive and finite");
  if (!x_new.allFinite()) throw InputError("x_new contains non-finite entries");
  const Matrix xfull = stack_rows(data.x(), x_new);
  const Index n = data.n();
  Matrix rhs = Matrix::Zero(n + 1, 2);
  rhs.col(0).head(n) = data.y();
  rhs(n, 1) = 1.0;
  const Matrix uv = detail::ridge_annihilate(xfull, rhs, rho);

  RidgeTrimWork w;
  w.u = uv.col(0);
  w.v = uv.col(1);
  const double a = w.v(n);
  const double b = w.u(n);
  w.y_star = -b / a;
  w.per_i_bounds.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double r1 = detail::crossing(b - w.u(i), w.v(i) - a);
    double r2 = detail::crossing(-b - w.u(i), w.v(i) + a);
    if (std::isnan(r1)) r1 = r2;
    if (std::isnan(r2)) r2 = r1;
    w.per_i_bounds.emplace_back(std::min(r1, r2), std::max(r1, r2));
  }
  return w;
}

/**
 * Conformal trimming with ridge as the fast model, solved in closed form.
 *
 * Row i "beats" the test point at y when |r_{n+1}(y)| > |r_i(y)|; y is
 * accepted when at most quantile_index(alpha_trim, n+1) - 1 rows do. The
 * violation sets are cut out by the crossing points, so the accepted set is
 * found exactly by checking every elementary segment between crossings. The
 * returned interval is the hull of the accepted set; when every test residual
 * dominates at infinity (test leverage <= 1/2, the usual case) the accepted
 * set is already an interval around y*.
 */
inline TrimSet ridge_trim(const Dataset& data, const Vector& x_new, double rho, double alpha_trim,
                          RidgeTrimWork* work_out = nullptr) {
  const Index n = data.n();
  const Index q = quantile_index(alpha_trim, n + 1);
  if (q == n + 1)
    throw UnboundedTrimError("alpha_trim below 1/(n+1) accepts every candidate value");
  const Index allowed = q - 1;  // rows allowed to beat the test point

  RidgeTrimWork w = ridge_trim_work(data, x_new, rho);
  const double a = w.v(n);
  const double b = w.u(n);

  auto violations = [&](double y) {
    Index count = 0;
    for (Index i = 0; i < n; ++i) {
      const double l1 = (b - w.u(i)) + (a - w.v(i)) * y;
      const double l2 = (b + w.u(i)) + (a + w.v(i)) * y;
      if (l1 * l2 > 0.0) ++count;
    }
    return count;
  };

  std::vector<double> breaks;
  breaks.reserve(2 * static_cast<std::size_t>(n) + 1);
  for (const auto& [lo, hi] : w.per_i_bounds) {
    if (std::isfinite(lo)) breaks.push_back(lo);
    if (std::isfinite(hi)) breaks.push_back(hi);
  }
  if (std::isfinite(w.y_star)) breaks.push_back(w.y_star);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (breaks.empty()) throw UnboundedTrimError("ridge residuals never cross; trim set is unbounded");

  const double span = breaks.back() - breaks.front();
  const double pad = 1.0 + std::abs(breaks.front()) + std::abs(breaks.back()) + span;
  if (violations(breaks.front() - pad) <= allowed || violations(breaks.back() + pad) <= allowed)
    throw UnboundedTrimError("ridge trim set is unbounded at this level");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  auto take = [&](double y) {
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  };
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    if (violations(breaks[k]) <= allowed) take(breaks[k]);
    if (k + 1 < breaks.size()) {
      const double mid = 0.5 * (breaks[k] + breaks[k + 1]);
      if (violations(mid) <= allowed) {
        take(breaks[k]);
        take(breaks[k + 1]);
      }
    }
  }
  if (!(lo <= hi)) {
    // y* zeroes the test residual, so it is accepted up to rounding.
    lo = hi = w.y_star;
  }
  if (work_out) *work_out = std::move(w);
  return {{lo, hi}, TrimMethod::RidgeTrim, alpha_trim};
}

/// Split conformal with the lasso fitted on `first_half`, used as the trim set.
inline TrimSet split_lasso_trim(const Dataset& data, const Vector& x_new, double lambda, double alpha_trim,
                                const std::vector<Index>& first_half, const LassoOptions& opts = {}) {
  const SplitInterval s = split_conformal(LassoFitter{lambda, opts}, data, x_new, alpha_trim, first_half);
  return {s.interval(), TrimMethod::SplitTrim, alpha_trim};
}

}  // namespace tcp
