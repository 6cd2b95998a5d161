#pragma once

#include "tcp/dataset.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace tcp {

/// Coefficients below this magnitude are treated as exact zeros.
inline constexpr double kSupportThreshold = 1e-12;

/// Active-set Gram matrices with reciprocal condition below this are rejected.
inline constexpr double kMinGramRcond = 1e-12;

struct RidgeFit {
  Vector beta;
  double rho = 0.0;
};

struct LassoFit {
  Vector beta;
  double lambda = 0.0;
  std::vector<Index> support;  // ascending
  std::vector<int> signs;      // +1 / -1, aligned with support
  double objective = 0.0;
  long sweeps = 0;
  std::vector<double> objective_trace;  // per sweep, only when requested
};

struct LassoOptions {
  double tol = 1e-7;
  long max_iter = 0;  // sweeps; 0 means 100 * p
  bool record_trace = false;
  // Re-solve on the detected signed support in closed form after coordinate
  // descent, keeping the result only if it is sign-consistent and KKT-clean.
  bool polish = true;
  std::optional<Vector> warm_start;
};

/// Coordinate descent did not settle within the sweep budget.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(LassoFit last)
      : std::runtime_error("lasso coordinate descent did not converge in " +
                           std::to_string(last.sweeps) + " sweeps"),
        last_(std::move(last)) {}
  const LassoFit& last_iterate() const noexcept { return last_; }

 private:
  LassoFit last_;
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

inline double lasso_objective(const Matrix& x, const Vector& y, const Vector& beta, double lambda) {
  return 0.5 * (y - x * beta).squaredNorm() + lambda * beta.lpNorm<1>();
}

/// Fill support/signs from the nonzero pattern of beta.
inline void extract_signed_support(LassoFit& fit) {
  fit.support.clear();
  fit.signs.clear();
  for (Index j = 0; j < fit.beta.size(); ++j) {
    if (std::abs(fit.beta(j)) > kSupportThreshold) {
      fit.support.push_back(j);
      fit.signs.push_back(fit.beta(j) > 0 ? 1 : -1);
    }
  }
}

inline Matrix select_columns(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
  return out;
}

inline Vector sign_vector(const std::vector<int>& signs) {
  Vector s(static_cast<Index>(signs.size()));
  for (std::size_t k = 0; k < signs.size(); ++k) s(static_cast<Index>(k)) = signs[k];
  return s;
}

/**
 * Closed-form lasso solution for a known signed support:
 * beta_M = (X_M' X_M)^{-1} (X_M' Y - lambda s), zero elsewhere.
 * Throws RankError when the active Gram matrix is numerically singular.
 */
inline Vector lasso_on_support(const Matrix& x, const Vector& y, const std::vector<Index>& support,
                               const std::vector<int>& signs, double lambda) {
  Vector beta = Vector::Zero(x.cols());
  if (support.empty()) return beta;
  const Matrix xm = select_columns(x, support);
  const Eigen::LLT<Matrix> llt(xm.transpose() * xm);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinGramRcond)
    throw RankError("active-set Gram matrix is singular");
  const Vector bm = llt.solve(xm.transpose() * y - lambda * sign_vector(signs));
  for (std::size_t k = 0; k < support.size(); ++k) beta(support[k]) = bm(static_cast<Index>(k));
  return beta;
}

/// Lasso stationarity: |X_j'r - lambda sign(b_j)| <= tol on the support, |X_j'r| <= lambda + tol off it.
inline bool kkt_check(const Matrix& x, const Vector& y, const Vector& beta, double lambda, double tol) {
  const Vector corr = x.transpose() * (y - x * beta);
  for (Index j = 0; j < beta.size(); ++j) {
    if (std::abs(beta(j)) > kSupportThreshold) {
      const double s = beta(j) > 0 ? 1.0 : -1.0;
      if (std::abs(corr(j) - lambda * s) > tol) return false;
    } else if (std::abs(corr(j)) > lambda + tol) {
      return false;
    }
  }
  return true;
}

inline bool kkt_check(const Dataset& data, const LassoFit& fit, double tol) {
  if (fit.beta.size() != data.p()) throw InputError("fit has wrong coefficient count");
  return kkt_check(data.x(), data.y(), fit.beta, fit.lambda, tol);
}

inline constexpr long kActiveSetAfterSweeps = 50;

namespace detail {

/**
 * Objective-decreasing moves on the signed support of `beta`: step toward the
 * minimizer of the smooth restricted problem (or along a null direction of X_M
 * when it has none), stopping at the first sign change and dropping that
 * coordinate. Returns true if beta changed.
 */
inline bool active_set_steps(const Matrix& x, const Vector& y, double lambda, Vector& beta) {
  bool moved = false;
  for (Index round = 0; round < beta.size(); ++round) {
    std::vector<Index> m;
    for (Index j = 0; j < beta.size(); ++j)
      if (beta(j) != 0.0) m.push_back(j);
    if (m.empty()) break;
    const Index k = static_cast<Index>(m.size());
    Matrix xm(x.rows(), k);
    Vector bm(k), s(k);
    for (Index i = 0; i < k; ++i) {
      xm.col(i) = x.col(m[i]);
      bm(i) = beta(m[i]);
      s(i) = bm(i) > 0 ? 1.0 : -1.0;
    }
    const Vector r = y - xm * bm;
    const Matrix gram = xm.transpose() * xm;
    const Vector g = xm.transpose() * r - lambda * s;
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
    Vector d = cod.solve(g);
    bool bounded = (gram * d - g).norm() <= 1e-9 * (1.0 + g.norm() + lambda * std::sqrt(static_cast<double>(k)));
    if (!bounded) {
      d = -(s - cod.solve(gram * s));  // descent direction inside null(X_M)
      if (d.norm() <= 1e-12 * std::sqrt(static_cast<double>(k))) break;
    }
    double t = bounded ? 1.0 : std::numeric_limits<double>::infinity();
    Index hit = -1;
    for (Index i = 0; i < k; ++i)
      if (d(i) * bm(i) < 0.0 && -bm(i) / d(i) < t) {
        t = -bm(i) / d(i);
        hit = i;
      }
    if (hit < 0 && !bounded) break;
    const Vector next = bm + t * d;
    const double before = lasso_objective(xm, y, bm, lambda);
    Vector trial = next;
    if (hit >= 0) trial(hit) = 0.0;
    for (Index i = 0; i < k; ++i)
      if (i != hit && trial(i) * s(i) <= 0.0) trial(i) = 0.0;
    if (!(lasso_objective(xm, y, trial, lambda) <= before)) break;
    for (Index i = 0; i < k; ++i) beta(m[i]) = trial(i);
    moved = true;
    if (hit < 0) break;  // reached the restricted minimizer
  }
  return moved;
}

inline bool try_polish(const Matrix& x, const Vector& y, LassoFit& fit) {
  if (fit.support.empty() || static_cast<Index>(fit.support.size()) > x.rows()) return false;
  Vector candidate;
  try {
    candidate = lasso_on_support(x, y, fit.support, fit.signs, fit.lambda);
  } catch (const RankError&) {
    return false;
  }
  for (std::size_t k = 0; k < fit.support.size(); ++k) {
    const double b = candidate(fit.support[k]);
    if (std::abs(b) <= kSupportThreshold || (b > 0 ? 1 : -1) != fit.signs[k]) return false;
  }
  // Rounding in X'r grows with the column and response norms.
  const double tol = 1e-9 * (1.0 + fit.lambda) +
                     1e-12 * x.colwise().norm().maxCoeff() * y.norm();
  if (!kkt_check(x, y, candidate, fit.lambda, tol)) return false;
  const double obj = lasso_objective(x, y, candidate, fit.lambda);
  if (obj > fit.objective + 1e-12 * (1.0 + std::abs(fit.objective))) return false;
  fit.beta = std::move(candidate);
  fit.objective = obj;
  return true;
}

}  // namespace detail

/**
 * Lasso by cyclic coordinate descent with soft-thresholding:
 *   minimize 0.5 ||Y - X b||^2 + lambda ||b||_1.
 *
 * Alternates full sweeps with sweeps over the current nonzero set; the fit is
 * declared converged when a full sweep moves no coefficient by more than
 * `tol`. No intercept, no standardization.
 */
inline LassoFit lasso_fit(const Matrix& x, const Vector& y, double lambda, const LassoOptions& opts = {}) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
  if (!(opts.tol > 0.0)) throw InputError("tol must be positive");
  if (x.rows() != y.size()) throw InputError("design/response size mismatch");
  const Index p = x.cols();
  const long max_sweeps = opts.max_iter > 0 ? opts.max_iter : 100 * static_cast<long>(p);

  LassoFit fit;
  fit.lambda = lambda;
  fit.beta = Vector::Zero(p);
  if (opts.warm_start) {
    if (opts.warm_start->size() != p) throw InputError("warm start has wrong length");
    fit.beta = *opts.warm_start;
  }
  Vector resid = y - x * fit.beta;
  const Vector col_sq = x.colwise().squaredNorm().transpose();

  auto update = [&](Index j) {
    const double old = fit.beta(j);
    if (col_sq(j) <= 0.0) {
      fit.beta(j) = 0.0;
      return std::abs(old);
    }
    const double z = x.col(j).dot(resid) + col_sq(j) * old;
    const double next = soft_threshold(z, lambda) / col_sq(j);
    const double delta = next - old;
    if (delta != 0.0) {
      resid.noalias() -= delta * x.col(j);
      fit.beta(j) = next;
    }
    return std::abs(delta);
  };
  auto note_sweep = [&] {
    ++fit.sweeps;
    if (opts.record_trace)
      fit.objective_trace.push_back(0.5 * resid.squaredNorm() + lambda * fit.beta.lpNorm<1>());
  };
  auto out_of_budget = [&] {
    if (fit.sweeps < max_sweeps) return;
    fit.objective = lasso_objective(x, y, fit.beta, lambda);
    extract_signed_support(fit);
    throw ConvergenceError(std::move(fit));
  };

  std::vector<Index> active;
  for (;;) {
    double change = 0.0;
    for (Index j = 0; j < p; ++j) change = std::max(change, update(j));
    note_sweep();
    if (change <= opts.tol) break;
    out_of_budget();

    active.clear();
    for (Index j = 0; j < p; ++j)
      if (fit.beta(j) != 0.0) active.push_back(j);
    for (;;) {
      double inner = 0.0;
      for (Index j : active) inner = std::max(inner, update(j));
      note_sweep();
      if (inner <= opts.tol) break;
      out_of_budget();
      // Slow runs: jump along the signed support instead of crawling.
      if (opts.polish && fit.sweeps >= kActiveSetAfterSweeps && fit.sweeps % kActiveSetAfterSweeps == 0 &&
          detail::active_set_steps(x, y, lambda, fit.beta)) {
        resid = y - x * fit.beta;
        break;
      }
    }
  }

  for (Index j = 0; j < p; ++j)
    if (std::abs(fit.beta(j)) <= kSupportThreshold) fit.beta(j) = 0.0;
  fit.objective = lasso_objective(x, y, fit.beta, lambda);
  extract_signed_support(fit);
  if (opts.polish && detail::try_polish(x, y, fit)) extract_signed_support(fit);
  return fit;
}

inline LassoFit lasso_fit(const Dataset& data, double lambda, double tol = 1e-7, long max_iter = 0) {
  LassoOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return lasso_fit(data.x(), data.y(), lambda, opts);
}

/// Ridge coefficients (X'X + rho I)^{-1} X'Y, via the n x n kernel system when p > n.
inline RidgeFit ridge_fit(const Matrix& x, const Vector& y, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("rho must be positive and finite");
  if (!x.allFinite() || !y.allFinite()) throw InputError("non-finite entries in ridge input");
  RidgeFit fit;
  fit.rho = rho;
  if (x.cols() > x.rows()) {
    Matrix k = x * x.transpose();
    k.diagonal().array() += rho;
    fit.beta = x.transpose() * k.llt().solve(y);
  } else {
    Matrix g = x.transpose() * x;
    g.diagonal().array() += rho;
    fit.beta = g.llt().solve(x.transpose() * y);
  }
  return fit;
}

inline RidgeFit ridge_fit(const Dataset& data, double rho) { return ridge_fit(data.x(), data.y(), rho); }

}  // namespace tcp
