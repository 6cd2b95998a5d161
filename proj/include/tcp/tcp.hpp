#pragma once

#include "tcp/conformal.hpp"
#include "tcp/dataset.hpp"
#include "tcp/lasso_region.hpp"
#include "tcp/trimming.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace tcp {

struct TcpConfig {
  double alpha_trim = 0.0;
  double alpha_predict = 0.1;
  TrimMethod trim_method = TrimMethod::RidgeTrim;
  double lambda = 1.0;                // prediction-step lasso penalty
  double rho = 1.0;                   // RidgeTrim penalty
  std::optional<double> split_lambda;  // SplitTrim penalty; defaults to lambda * sqrt(|I1| / n)
  double grid_step = 0.01;
  std::uint64_t seed = 0;             // drives the SplitTrim half split

  void validate() const {
    auto in_unit = [](double a) { return a > 0.0 && a < 1.0; };
    if (!in_unit(alpha_trim)) throw InputError("alpha_trim must lie in (0, 1)");
    if (!in_unit(alpha_predict)) throw InputError("alpha_predict must lie in (0, 1)");
    if (!(alpha_trim + alpha_predict < 1.0)) throw InputError("alpha_trim + alpha_predict must be < 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("rho must be positive");
    if (split_lambda && !(*split_lambda >= 0.0)) throw InputError("split_lambda must be >= 0");
    if (!(grid_step > 0.0) || !std::isfinite(grid_step)) throw InputError("grid_step must be positive");
  }

  double split_lambda_for(Index n) const {
    if (split_lambda) return *split_lambda;
    return lambda * std::sqrt(static_cast<double>(n / 2) / static_cast<double>(n));
  }
};

/// Guaranteed coverage of the two-stage procedure: 1 - alpha_trim - alpha_predict.
inline double coverage_bound(double alpha_trim, double alpha_predict) { return 1.0 - alpha_trim - alpha_predict; }

inline double coverage_bound(const TcpConfig& config) {
  config.validate();
  return coverage_bound(config.alpha_trim, config.alpha_predict);
}

struct TcpResult {
  TrimSet trim_set;
  PredictionSet prediction_set;
  double trial_width = 0.0;
  double pi_width = 0.0;
  long n_slow_fits = 0;
  long n_fast_region_evals = 0;
  bool empty_trim = false;
  ScanStats scan;
};

/// Step 1: the trim interval for the configured method.
inline TrimSet compute_trim(const TcpConfig& config, const Dataset& data, const Vector& x_new) {
  switch (config.trim_method) {
    case TrimMethod::MaxTrim: return max_trim(data);
    case TrimMethod::RidgeTrim: return ridge_trim(data, x_new, config.rho, config.alpha_trim);
    case TrimMethod::SplitTrim:
      return split_lasso_trim(data, x_new, config.split_lambda_for(data.n()), config.alpha_trim,
                              make_split(data.n(), config.seed));
  }
  throw InputError("unknown trim method");
}

/// Grid of spacing `step` anchored at both ends of the trim interval.
inline CandidateGrid trim_grid(const Interval& trim, double step) { return CandidateGrid::with_step(trim.lo, trim.hi, step); }

/**
 * Trimmed conformal prediction with the lasso as the accurate model.
 *
 * The trim interval is computed first; the lasso conformal test at level
 * alpha_predict then runs only over a grid covering that interval, with fits
 * shared across signed-support regions. MaxTrim always uses 1/(n+1) as its
 * trimming level regardless of config.alpha_trim.
 */
inline TcpResult tcp_predict(const TcpConfig& config, const Dataset& data, const Vector& x_new,
                             const ScanOptions& scan_options = {}) {
  config.validate();
  if (x_new.size() != data.p()) throw InputError("x_new length does not match feature count");
  if (!x_new.allFinite()) throw InputError("x_new contains non-finite entries");

  TcpResult result;
  result.trim_set = compute_trim(config, data, x_new);
  const Interval& trim = result.trim_set.interval;
  result.trial_width = std::max(0.0, trim.length());
  if (!(trim.lo <= trim.hi)) {
    result.empty_trim = true;
    result.prediction_set.grid = CandidateGrid{trim.lo, trim.lo, config.grid_step};
    return result;
  }

  const CandidateGrid grid = trim_grid(trim, config.grid_step);
  const auto points = grid.points();
  std::vector<bool> accepted;
  accepted.reserve(points.size());
  const auto test = static_cast<std::size_t>(data.n());
  result.scan = region_scan(
      data, x_new, config.lambda, points,
      [&](double, const Vector& r) {
        accepted.push_back(conformity_accept(
            std::span<const double>(r.data(), static_cast<std::size_t>(r.size())), test, config.alpha_predict));
      },
      scan_options);
  result.prediction_set = PredictionSet::from_mask(grid, points, accepted);
  result.pi_width = result.prediction_set.width();
  result.n_slow_fits = result.scan.full_solves;
  result.n_fast_region_evals = result.scan.region_evals;
  return result;
}

}  // namespace tcp
