#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace tcp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Malformed or out-of-domain caller input.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Gram matrix of an active set is singular or too ill-conditioned to invert.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of a fit at a specific candidate response value.
class GridPointError : public std::runtime_error {
 public:
  GridPointError(double y, const std::string& what)
      : std::runtime_error("fit failed at y = " + std::to_string(y) + ": " + what), y_(y) {}
  double y() const noexcept { return y_; }

 private:
  double y_;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/**
 * Training sample: design matrix X (n x p) and response Y (n).
 *
 * Immutable after construction. The constructor validates shape and
 * finiteness, so every Dataset in circulation satisfies the invariants.
 */
class Dataset {
 public:
  Dataset(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() != y_.size())
      throw InputError("design matrix has " + std::to_string(x_.rows()) +
                       " rows but response has length " + std::to_string(y_.size()));
    if (x_.rows() < 1) throw InputError("dataset needs at least one sample");
    if (x_.cols() < 1) throw InputError("dataset needs at least one feature");
    if (!x_.allFinite() || !y_.allFinite()) throw InputError("dataset contains non-finite entries");
  }

  const Matrix& x() const noexcept { return x_; }
  const Vector& y() const noexcept { return y_; }
  Index n() const noexcept { return x_.rows(); }
  Index p() const noexcept { return x_.cols(); }

  /// Rows selected by `rows`, in the given order.
  Dataset subset(const std::vector<Index>& rows) const {
    Matrix xs(static_cast<Index>(rows.size()), p());
    Vector ys(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] < 0 || rows[k] >= n()) throw InputError("row index out of range");
      xs.row(static_cast<Index>(k)) = x_.row(rows[k]);
      ys(static_cast<Index>(k)) = y_(rows[k]);
    }
    return Dataset(std::move(xs), std::move(ys));
  }

  /// The (n+1)-point sample with (x_new, y) appended as the last row.
  Dataset augmented(const Vector& x_new, double y) const {
    if (x_new.size() != p()) throw InputError("x_new length does not match feature count");
    Matrix xa(n() + 1, p());
    xa.topRows(n()) = x_;
    xa.row(n()) = x_new.transpose();
    Vector ya(n() + 1);
    ya.head(n()) = y_;
    ya(n()) = y;
    return Dataset(std::move(xa), std::move(ya));
  }

 private:
  Matrix x_;
  Vector y_;
};

/// X stacked with x_new as row n+1.
inline Matrix stack_rows(const Matrix& x, const Vector& x_new) {
  if (x_new.size() != x.cols()) throw InputError("x_new length does not match feature count");
  Matrix full(x.rows() + 1, x.cols());
  full.topRows(x.rows()) = x;
  full.row(x.rows()) = x_new.transpose();
  return full;
}

}  // namespace tcp
