#pragma once

// Brute-force IsoScore used to cross-check the main implementation. It shares
// no numerical code with isoscore.hpp: sums are accumulated in long double, the
// covariance is formed explicitly, and its spectrum comes from a plain cyclic
// Jacobi eigenvalue iteration. Only the PointCloud container is shared.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "isoscope/error.hpp"
#include "isoscope/geometry.hpp"

namespace isoscope::oracle {

using Real = long double;

/// Dense symmetric matrix in row-major storage.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(std::size_t n) : n_(n), a_(n * n, 0.0L) {}
  std::size_t size() const { return n_; }
  Real& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<Real> a_;
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<Real> jacobi_eigenvalues(SymmetricMatrix a, int max_sweeps = 100) {
  const std::size_t n = a.size();
  auto off_diagonal = [&] {
    Real s = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return s;
  };
  Real scale = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale += a(i, j) * a(i, j);
  const Real tolerance = scale * std::numeric_limits<Real>::epsilon() *
                         std::numeric_limits<Real>::epsilon();

  for (int sweep = 0; sweep < max_sweeps && off_diagonal() > tolerance; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const Real apq = a(p, q);
        if (apq == 0) continue;
        const Real theta = (a(q, q) - a(p, p)) / (2 * apq);
        const Real t = (theta >= 0 ? 1 : -1) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const Real c = 1 / std::sqrt(t * t + 1);
        const Real s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const Real akp = a(k, p);
          const Real akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const Real apk = a(p, k);
          const Real aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<Real> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

/// Sample-covariance eigenvalues (all n of them, zeros included), descending.
/// When N - 1 < n the nonzero spectrum is taken from the smaller Gram matrix
/// of the centered rows, which has the same nonzero eigenvalues.
inline std::vector<Real> covariance_spectrum(const PointCloud& cloud) {
  const auto rows = static_cast<std::size_t>(cloud.size());
  const auto dim = static_cast<std::size_t>(cloud.dim());
  std::vector<Real> centered(rows * dim);
  for (std::size_t j = 0; j < dim; ++j) {
    Real mean = 0;
    for (std::size_t i = 0; i < rows; ++i) mean += cloud.matrix()(i, j);
    mean /= static_cast<Real>(rows);
    for (std::size_t i = 0; i < rows; ++i) centered[i * dim + j] = cloud.matrix()(i, j) - mean;
  }
  const Real denom = static_cast<Real>(rows - 1);

  std::vector<Real> values;
  if (rows <= dim) {
    SymmetricMatrix gram(rows);
    for (std::size_t a = 0; a < rows; ++a) {
      for (std::size_t b = a; b < rows; ++b) {
        Real s = 0;
        for (std::size_t k = 0; k < dim; ++k) s += centered[a * dim + k] * centered[b * dim + k];
        gram(a, b) = gram(b, a) = s / denom;
      }
    }
    values = jacobi_eigenvalues(std::move(gram));
    values.resize(dim, 0.0L);
  } else {
    SymmetricMatrix cov(dim);
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = a; b < dim; ++b) {
        Real s = 0;
        for (std::size_t i = 0; i < rows; ++i) s += centered[i * dim + a] * centered[i * dim + b];
        cov(a, b) = cov(b, a) = s / denom;
      }
    }
    values = jacobi_eigenvalues(std::move(cov));
  }
  for (auto& v : values) v = std::max(v, Real{0});
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

/// IsoScore evaluated step by step from the covariance spectrum.
inline double isoscore(const PointCloud& cloud) {
  if (cloud.empty()) fail(ErrorKind::InvalidCloud, "empty point cloud");
  if (cloud.dim() < 2) {
    fail(ErrorKind::InvalidDimension, "oracle: n must be >= 2, got " + std::to_string(cloud.dim()));
  }
  if (cloud.size() < 2) fail(ErrorKind::DegenerateCloud, "oracle: need at least 2 observations");

  const auto spectrum = covariance_spectrum(cloud);
  const Real n = static_cast<Real>(spectrum.size());

  // Zero-variance test on the raw data scale, same threshold as the main path.
  Real trace = 0;
  for (Real v : spectrum) trace += v;
  Real max_abs = 0;
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    for (Eigen::Index j = 0; j < cloud.dim(); ++j)
      max_abs = std::max<Real>(max_abs, std::fabs(cloud.matrix()(i, j)));
  const Real noise = 64 * static_cast<Real>(std::numeric_limits<double>::epsilon()) * max_abs *
                     std::sqrt(static_cast<Real>(cloud.size()) * n);
  if (!(std::sqrt(trace * static_cast<Real>(cloud.size() - 1)) > noise)) {
    fail(ErrorKind::DegenerateCloud, "oracle: total variance is zero");
  }

  Real norm = 0;
  for (Real v : spectrum) norm += v * v;
  norm = std::sqrt(norm);

  Real distance_sq = 0;
  for (Real v : spectrum) {
    const Real scaled = std::sqrt(n) * v / norm;
    distance_sq += (scaled - 1) * (scaled - 1);
  }
  const Real delta = std::sqrt(distance_sq) / std::sqrt(2 * (n - std::sqrt(n)));
  Real phi = (n - delta * delta * (n - std::sqrt(n)));
  phi = phi * phi / (n * n);
  phi = std::min<Real>(std::max<Real>(phi, 1 / n), 1);
  const Real score = (n * phi - 1) / (n - 1);
  return static_cast<double>(std::min<Real>(std::max<Real>(score, 0), 1));
}

}  // namespace isoscope::oracle
