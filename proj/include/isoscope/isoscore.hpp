#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "isoscope/geometry.hpp"

namespace isoscope {

struct IsoScoreResult {
  double score = 0.0;  // in [0, 1]
  double phi = 0.0;    // fraction of dimensions isotropically used, in [1/n, 1]
  double delta = 0.0;  // distance of the normalized variance diagonal from the all-ones vector
  Eigen::Index n = 0;
  Eigen::Index N = 0;
};

/// IsoScore from an already computed principal-variance diagonal.
///
/// The diagonal is scaled to norm sqrt(n), compared against the all-ones
/// vector, converted to the fraction of used dimensions phi, and phi is mapped
/// linearly from [1/n, 1] onto [0, 1].
inline IsoScoreResult isoscore_from_variances(const VarianceDiagonal& variances,
                                              Eigen::Index observations = 0) {
  const Eigen::Index dim = variances.size();
  if (dim < 2) {
    fail(ErrorKind::InvalidDimension,
         "IsoScore needs n >= 2 dimensions, got " + std::to_string(dim));
  }
  const double norm = variances.values.norm();
  if (!(norm > 0.0)) fail(ErrorKind::DegenerateCloud, "total variance is zero");

  const double n = static_cast<double>(dim);
  const double root_n = std::sqrt(n);
  const Vector normalized = root_n * variances.values / norm;
  const double delta = (normalized - Vector::Ones(dim)).norm() / std::sqrt(2.0 * (n - root_n));
  double phi = std::pow(n - delta * delta * (n - root_n), 2) / (n * n);
  phi = std::clamp(phi, 1.0 / n, 1.0);

  IsoScoreResult out;
  out.phi = phi;
  out.delta = delta;
  out.score = std::clamp((n * phi - 1.0) / (n - 1.0), 0.0, 1.0);
  out.n = dim;
  out.N = observations;
  return out;
}

inline IsoScoreResult isoscore(const PointCloud& cloud,
                               CovarianceDenominator denom = CovarianceDenominator::Sample) {
  if (cloud.empty()) fail(ErrorKind::InvalidCloud, "empty point cloud");
  if (cloud.dim() < 2) {
    fail(ErrorKind::InvalidDimension,
         "IsoScore needs n >= 2 dimensions, got " + std::to_string(cloud.dim()));
  }
  detail::require_rows(cloud, 2);
  detail::require_valid_spread(cloud);
  return isoscore_from_variances(principal_variances(cloud, denom), cloud.size());
}

/// Groups with fewer than ten observations per dimension are reported as low-sample.
inline bool is_low_sample(Eigen::Index observations, Eigen::Index dim) {
  return observations < 10 * dim;
}

}  // namespace isoscope
