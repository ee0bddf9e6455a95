#pragma once

// Linear-algebra kernel: point clouds, centering, covariance, PCA and SVD spectra.
// Everything is computed in double precision regardless of the on-disk dtype.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "isoscope/error.hpp"

namespace isoscope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N x n matrix of observations: rows are vectors, columns are ambient dimensions.
/// Construction rejects empty shapes and non-finite entries.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(Matrix data) : data_(std::move(data)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      fail(ErrorKind::InvalidCloud, "point cloud must have at least one row and one column");
    }
    for (Eigen::Index j = 0; j < data_.cols(); ++j) {
      for (Eigen::Index i = 0; i < data_.rows(); ++i) {
        if (!std::isfinite(data_(i, j))) {
          fail(ErrorKind::InvalidCloud, "non-finite entry at row " + std::to_string(i) +
                                            ", column " + std::to_string(j));
        }
      }
    }
  }

  /// Number of observations (N).
  Eigen::Index size() const noexcept { return data_.rows(); }
  /// Ambient dimension (n).
  Eigen::Index dim() const noexcept { return data_.cols(); }
  bool empty() const noexcept { return data_.size() == 0; }

  const Matrix& matrix() const noexcept { return data_; }

 private:
  Matrix data_;
};

/// Per-principal-axis variances, nonnegative and sorted descending.
struct VarianceDiagonal {
  Vector values;

  Eigen::Index size() const noexcept { return values.size(); }
  double total() const { return values.sum(); }
};

struct Spectrum {
  Vector singular_values;  // nonincreasing
  Vector normalized;       // singular_values / singular_values[0]
};

enum class CovarianceDenominator {
  Sample,      // N - 1
  Population,  // N
};

enum class Centering { Centered, Raw };

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// A centered matrix whose Frobenius norm is within rounding noise of the
// centering step carries no variance.
inline bool negligible_spread(double frobenius, double max_abs, Eigen::Index rows,
                              Eigen::Index cols) {
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * max_abs *
                       std::sqrt(static_cast<double>(rows) * static_cast<double>(cols));
  return !(frobenius > noise);
}

inline double denominator(Eigen::Index rows, CovarianceDenominator d) {
  return d == CovarianceDenominator::Sample ? static_cast<double>(rows - 1)
                                            : static_cast<double>(rows);
}

inline void require_rows(const PointCloud& cloud, Eigen::Index min_rows) {
  if (cloud.empty()) fail(ErrorKind::InvalidCloud, "empty point cloud");
  if (cloud.size() < min_rows) {
    fail(ErrorKind::DegenerateCloud, "need at least " + std::to_string(min_rows) +
                                         " observations, got " + std::to_string(cloud.size()));
  }
}

}  // namespace detail

/// Subtracts the column means.
inline PointCloud center(const PointCloud& cloud) {
  if (cloud.empty()) fail(ErrorKind::InvalidCloud, "empty point cloud");
  const Eigen::RowVectorXd mean = cloud.matrix().colwise().mean();
  return PointCloud(cloud.matrix().rowwise() - mean);
}

inline Matrix covariance(const PointCloud& cloud,
                         CovarianceDenominator denom = CovarianceDenominator::Sample) {
  detail::require_rows(cloud, 2);
  const Eigen::RowVectorXd mean = cloud.matrix().colwise().mean();
  const Matrix centered = cloud.matrix().rowwise() - mean;
  Matrix cov = Matrix::Zero(cloud.dim(), cloud.dim());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov / detail::denominator(cloud.size(), denom);
}

struct PcaResult {
  PointCloud reoriented;      // centered cloud projected onto all n principal axes
  VarianceDiagonal variances; // covariance diagonal of `reoriented`
  Matrix axes;                // columns are unit principal axes, same order as variances
};

namespace detail {

struct EigenPairs {
  Vector values;
  Matrix vectors;
};

// Descending eigenvalues, negatives clamped to zero. Equal eigenvalues are
// ordered by the original axis on which their eigenvector is concentrated,
// and each eigenvector's dominant component is made positive.
inline EigenPairs sorted_eigenpairs(const Matrix& cov, bool with_vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(
      cov, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    fail(ErrorKind::InvalidCloud, "eigendecomposition of covariance did not converge");
  }
  const Eigen::Index n = cov.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::vector<Eigen::Index> dominant(static_cast<std::size_t>(n), 0);
  if (with_vectors) {
    for (Eigen::Index k = 0; k < n; ++k) {
      solver.eigenvectors().col(k).cwiseAbs().maxCoeff(&dominant[static_cast<std::size_t>(k)]);
    }
  }
  const Vector& raw = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (raw(a) != raw(b)) return raw(a) > raw(b);
    return dominant[static_cast<std::size_t>(a)] < dominant[static_cast<std::size_t>(b)];
  });

  EigenPairs out;
  out.values.resize(n);
  if (with_vectors) out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = std::max(raw(src), 0.0);
    if (with_vectors) {
      Vector v = solver.eigenvectors().col(src);
      if (v(dominant[static_cast<std::size_t>(src)]) < 0) v = -v;
      out.vectors.col(k) = v;
    }
  }
  return out;
}

inline void require_valid_spread(const PointCloud& cloud) {
  const Eigen::RowVectorXd mean = cloud.matrix().colwise().mean();
  const double frob = (cloud.matrix().rowwise() - mean).norm();
  if (negligible_spread(frob, max_abs(cloud.matrix()), cloud.size(), cloud.dim())) {
    fail(ErrorKind::DegenerateCloud, "total variance is zero (all rows identical)");
  }
}

}  // namespace detail

/// Principal-axis variances only; equal to `pca_reorient(cloud).variances`.
inline VarianceDiagonal principal_variances(
    const PointCloud& cloud, CovarianceDenominator denom = CovarianceDenominator::Sample) {
  return VarianceDiagonal{detail::sorted_eigenpairs(covariance(cloud, denom), false).values};
}

inline PcaResult pca_reorient(const PointCloud& cloud,
                              CovarianceDenominator denom = CovarianceDenominator::Sample) {
  detail::require_rows(cloud, 2);
  auto pairs = detail::sorted_eigenpairs(covariance(cloud, denom), true);
  const PointCloud centered = center(cloud);
  Matrix projected = centered.matrix() * pairs.vectors;
  return PcaResult{PointCloud(std::move(projected)), VarianceDiagonal{std::move(pairs.values)},
                   std::move(pairs.vectors)};
}

/// Singular values of the (optionally centered) data matrix.
inline Spectrum svd_spectrum(const PointCloud& cloud, Centering centering = Centering::Centered) {
  if (cloud.empty()) fail(ErrorKind::InvalidCloud, "empty point cloud");
  Matrix data = cloud.matrix();
  if (centering == Centering::Centered) {
    const Eigen::RowVectorXd mean = data.colwise().mean();
    data.rowwise() -= mean;
  }
  Eigen::BDCSVD<Matrix> svd(data);
  Spectrum out;
  out.singular_values = svd.singularValues();
  const double lead = out.singular_values.size() > 0 ? out.singular_values(0) : 0.0;
  if (detail::negligible_spread(lead, detail::max_abs(cloud.matrix()), cloud.size(),
                                cloud.dim())) {
    fail(ErrorKind::DegenerateCloud, "data matrix is all zeros");
  }
  out.normalized = out.singular_values / lead;
  return out;
}

}  // namespace isoscope
