#pragma once
// Independent reference implementations used only by the tests.

#include "tcp/conformal.hpp"
#include "tcp/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using tcp::Index;
using tcp::Matrix;
using tcp::Vector;

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

inline Vector gaussian_vector(Index n, std::mt19937_64& rng) { return gaussian_matrix(n, 1, rng).col(0); }

struct Instance {
  tcp::Dataset data;
  Vector x_new;
  double y_new;
};

// Sparse linear model with unit noise; `signal` on the first min(k, p) coordinates.
inline Instance sparse_instance(Index n, Index p, Index k, double signal, std::mt19937_64& rng) {
  Matrix x = gaussian_matrix(n + 1, p, rng);
  Vector beta = Vector::Zero(p);
  for (Index j = 0; j < std::min(k, p); ++j) beta(j) = signal;
  Vector y = x * beta + gaussian_vector(n + 1, rng);
  return {tcp::Dataset(x.topRows(n), y.head(n)), x.row(n).transpose(), y(n)};
}

inline double lasso_objective(const Matrix& x, const Vector& y, const Vector& b, double lambda) {
  return 0.5 * (y - x * b).squaredNorm() + lambda * b.lpNorm<1>();
}

// Accelerated proximal gradient with function-value restart.
inline Vector lasso_fista(const Matrix& x, const Vector& y, double lambda, long max_iter = 400000) {
  const Index p = x.cols();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(x.transpose() * x, Eigen::EigenvaluesOnly);
  const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / lip;
  const Matrix g = x.transpose() * x;
  const Vector xty = x.transpose() * y;
  auto prox = [&](const Vector& v) {
    Vector out(v.size());
    for (Index j = 0; j < v.size(); ++j) {
      const double a = std::abs(v(j)) - step * lambda;
      out(j) = a > 0 ? std::copysign(a, v(j)) : 0.0;
    }
    return out;
  };
  Vector b = Vector::Zero(p), z = b;
  double t = 1.0;
  double f_prev = lasso_objective(x, y, b, lambda);
  for (long it = 0; it < max_iter; ++it) {
    const Vector grad = g * z - xty;
    Vector b_next = prox(z - step * grad);
    const double f = lasso_objective(x, y, b_next, lambda);
    if (f > f_prev) {  // restart momentum
      t = 1.0;
      z = b;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = b_next + ((t - 1.0) / t_next) * (b_next - b);
    const double moved = (b_next - b).lpNorm<Eigen::Infinity>();
    b = std::move(b_next);
    t = t_next;
    f_prev = f;
    if (moved < 1e-14 * (1.0 + b.lpNorm<Eigen::Infinity>())) break;
  }
  return b;
}

inline Vector ridge_normal_equations(const Matrix& x, const Vector& y, double rho) {
  Matrix a = x.transpose() * x + rho * Matrix::Identity(x.cols(), x.cols());
  return a.fullPivLu().solve(x.transpose() * y);
}

// Rank by explicit sort with index tie-break (stable sort keeps earlier indices first among equals).
inline Index sort_rank(const std::vector<double>& r, std::size_t test) {
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
  return static_cast<Index>(std::find(order.begin(), order.end(), test) - order.begin()) + 1;
}

inline Index ceil_quantile(double alpha, Index m) {
  const auto k = static_cast<Index>(std::ceil((1.0 - alpha) * static_cast<double>(m) - 1e-9));
  return std::clamp<Index>(k, 1, m);
}

// Conformal acceptance of y for a ridge fit at penalty rho, by explicit refit.
inline bool ridge_conformal_accept(const tcp::Dataset& d, const Vector& x_new, double y, double rho, double alpha) {
  const tcp::Dataset aug = d.augmented(x_new, y);
  const Vector beta = ridge_normal_equations(aug.x(), aug.y(), rho);
  const Vector r = (aug.y() - aug.x() * beta).cwiseAbs();
  std::vector<double> rv(r.data(), r.data() + r.size());
  return sort_rank(rv, rv.size() - 1) <= ceil_quantile(alpha, static_cast<Index>(rv.size()));
}

// Split set by its conformal definition: the test score |y - center| joins the m calibration
// scores and y is kept when its rank (1 + strictly smaller scores) is within ceil((1-alpha)(m+1)).
inline bool split_set_member(double y, double center, const std::vector<double>& calib, double alpha) {
  const double s = std::abs(y - center);
  Index below = 0;
  for (double c : calib)
    if (c < s) ++below;
  return below + 1 <= ceil_quantile(alpha, static_cast<Index>(calib.size()) + 1);
}

}  // namespace oracle
