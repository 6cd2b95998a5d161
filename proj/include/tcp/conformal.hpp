#pragma once

#include "tcp/dataset.hpp"
#include "tcp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace tcp {

/// ceil((1 - alpha) m), clamped to [1, m].
inline Index quantile_index(double alpha, Index m) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (m < 1) throw InputError("quantile_index needs m >= 1");
  const double target = (1.0 - alpha) * static_cast<double>(m);
  // Absorb representation error, e.g. (1 - 1/201) * 201 landing just above 200.
  auto k = static_cast<Index>(std::ceil(target - 1e-9 * std::max(1.0, target)));
  return std::clamp<Index>(k, 1, m);
}

/// Rank of entry `test_index`: strictly smaller entries, plus ties at or before it.
inline Index conformity_rank(std::span<const double> abs_residuals, std::size_t test_index) {
  const double t = abs_residuals[test_index];
  Index rank = 0;
  for (std::size_t i = 0; i < abs_residuals.size(); ++i) {
    const double r = abs_residuals[i];
    if (r < t || (r == t && i <= test_index)) ++rank;
  }
  return rank;
}

inline bool conformity_accept(std::span<const double> abs_residuals, std::size_t test_index, double alpha) {
  if (test_index >= abs_residuals.size()) throw InputError("test index out of range");
  const auto m = static_cast<Index>(abs_residuals.size());
  return conformity_rank(abs_residuals, test_index) <= quantile_index(alpha, m);
}

inline bool conformity_accept(const Vector& abs_residuals, Index test_index, double alpha) {
  return conformity_accept(std::span<const double>(abs_residuals.data(), static_cast<std::size_t>(abs_residuals.size())),
                           static_cast<std::size_t>(test_index), alpha);
}

/// Candidate response values lo, lo + step, ... (< hi), then hi itself.
struct CandidateGrid {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  static CandidateGrid with_step(double lo, double hi, double step) {
    CandidateGrid g{lo, hi, step};
    g.validate();
    return g;
  }
  /// `count` equal sub-intervals, i.e. count + 1 points.
  static CandidateGrid with_count(double lo, double hi, Index count) {
    if (count < 1) throw InputError("grid count must be positive");
    const double step = hi > lo ? (hi - lo) / static_cast<double>(count) : 1.0;
    return with_step(lo, hi, step);
  }
  /// Default resolution: 1000 sub-intervals.
  static CandidateGrid over(double lo, double hi) { return with_count(lo, hi, 1000); }

  void validate() const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step))
      throw InputError("grid bounds and step must be finite");
    if (lo > hi) throw InputError("grid needs lo <= hi");
    if (!(step > 0.0)) throw InputError("grid step must be positive");
    if ((hi - lo) / step > 5e7) throw InputError("grid has too many points");
  }

  std::vector<double> points() const {
    validate();
    std::vector<double> pts;
    const double slack = 1e-9 * step;
    for (Index i = 0;; ++i) {
      const double y = lo + static_cast<double>(i) * step;
      if (y >= hi - slack) break;
      pts.push_back(y);
    }
    pts.push_back(hi);
    return pts;
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Accepted candidate values, and their maximal runs of consecutive grid points.
struct PredictionSet {
  std::vector<Interval> intervals;
  CandidateGrid grid;
  std::vector<double> accepted_points;

  static PredictionSet from_mask(const CandidateGrid& grid, std::span<const double> points,
                                 const std::vector<bool>& accepted) {
    PredictionSet set;
    set.grid = grid;
    bool open = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (accepted[i]) {
        set.accepted_points.push_back(points[i]);
        if (!open) set.intervals.push_back({points[i], points[i]});
        set.intervals.back().hi = points[i];
        open = true;
      } else {
        open = false;
      }
    }
    return set;
  }

  bool empty() const { return accepted_points.empty(); }

  /// Total length of the disjoint runs.
  double width() const {
    double w = 0.0;
    for (const auto& iv : intervals) w += iv.length();
    return w;
  }

  bool contains(double y) const {
    return std::any_of(intervals.begin(), intervals.end(), [y](const Interval& iv) { return iv.contains(y); });
  }
};

/// Fitted regression function: maps a feature vector to a prediction.
template <class P>
concept Predictor = requires(const P& mu, const Vector& x) {
  { mu(x) } -> std::convertible_to<double>;
};

/// Regression procedure: maps a sample to a fitted Predictor.
template <class F>
concept Fitter = requires(const F& fit, const Dataset& data) {
  { fit(data) } -> Predictor;
};

struct LinearPredictor {
  Vector beta;
  double operator()(const Vector& x) const { return x.dot(beta); }
};

struct ZeroFitter {
  LinearPredictor operator()(const Dataset& data) const { return {Vector::Zero(data.p())}; }
};

struct RidgeFitter {
  double rho = 1.0;
  LinearPredictor operator()(const Dataset& data) const { return {ridge_fit(data, rho).beta}; }
};

struct LassoFitter {
  double lambda = 1.0;
  LassoOptions options{};
  LinearPredictor operator()(const Dataset& data) const {
    return {lasso_fit(data.x(), data.y(), lambda, options).beta};
  }
};

/// |Y_i - mu(X_i)| for every row.
template <Predictor P>
Vector abs_residuals(const P& mu, const Matrix& x, const Vector& y) {
  Vector r(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const Vector xi = x.row(i).transpose();
    r(i) = std::abs(y(i) - mu(xi));
  }
  return r;
}

/// Full conformal acceptance at each of `points` (any order).
template <Fitter F>
std::vector<bool> full_conformal_mask(const F& fitter, const Dataset& data, const Vector& x_new,
                                      std::span<const double> points, double alpha) {
  if (x_new.size() != data.p()) throw InputError("x_new length does not match feature count");
  std::vector<bool> accepted(points.size(), false);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double y = points[k];
    Vector r;
    try {
      const Dataset aug = data.augmented(x_new, y);
      r = abs_residuals(fitter(aug), aug.x(), aug.y());
    } catch (const GridPointError&) {
      throw;
    } catch (const std::exception& e) {
      throw GridPointError(y, e.what());
    }
    accepted[k] = conformity_accept(r, data.n(), alpha);
  }
  return accepted;
}

/**
 * Full conformal prediction set over a candidate grid: for each candidate y
 * the fitter is refit on the sample augmented with (x_new, y), and y is kept
 * when the test point's absolute residual ranks within quantile_index(alpha, n+1).
 */
template <Fitter F>
PredictionSet full_conformal(const F& fitter, const Dataset& data, const Vector& x_new,
                             const CandidateGrid& grid, double alpha) {
  const auto pts = grid.points();
  return PredictionSet::from_mask(grid, pts, full_conformal_mask(fitter, data, x_new, pts, alpha));
}

struct SplitInterval {
  double center = 0.0;
  double radius = 0.0;
  std::vector<Index> split_indices;  // I1, rows used for fitting
  double lo() const { return center - radius; }
  double hi() const { return center + radius; }
  Interval interval() const { return {lo(), hi()}; }
};

/// I1 = first floor(n/2) indices of a seeded shuffle of 0..n-1.
inline std::vector<Index> make_split(Index n, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n / 2));
  return idx;
}

inline std::vector<Index> split_complement(Index n, const std::vector<Index>& first) {
  std::vector<bool> in_first(static_cast<std::size_t>(n), false);
  for (Index i : first) {
    if (i < 0 || i >= n) throw InputError("split index out of range");
    if (in_first[static_cast<std::size_t>(i)]) throw InputError("duplicate split index");
    in_first[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Index> rest;
  for (Index i = 0; i < n; ++i)
    if (!in_first[static_cast<std::size_t>(i)]) rest.push_back(i);
  return rest;
}

/// The quantile_index(alpha, |values| + 1)-th smallest of `values`, index clamped to |values|.
inline double split_radius(std::vector<double> values, double alpha) {
  if (values.empty()) throw InputError("calibration half is empty");
  const auto m = static_cast<Index>(values.size());
  const Index k = std::min(quantile_index(alpha, m + 1), m);
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[static_cast<std::size_t>(k - 1)];
}

/**
 * Split conformal interval: fit on rows `first_half`, calibrate absolute
 * residuals on the remaining rows, return center +/- radius.
 */
template <Fitter F>
SplitInterval split_conformal(const F& fitter, const Dataset& data, const Vector& x_new, double alpha,
                              const std::vector<Index>& first_half) {
  if (x_new.size() != data.p()) throw InputError("x_new length does not match feature count");
  if (first_half.empty()) throw InputError("fitting half is empty");
  const auto second_half = split_complement(data.n(), first_half);
  if (second_half.empty()) throw InputError("calibration half is empty");

  const Dataset train = data.subset(first_half);
  const auto mu = fitter(train);
  std::vector<double> resid;
  resid.reserve(second_half.size());
  for (Index i : second_half) {
    const Vector xi = data.x().row(i).transpose();
    resid.push_back(std::abs(data.y()(i) - mu(xi)));
  }
  SplitInterval out;
  out.center = mu(x_new);
  out.radius = split_radius(std::move(resid), alpha);
  out.split_indices = first_half;
  return out;
}

}  // namespace tcp
