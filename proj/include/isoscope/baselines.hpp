#pragma once

// Reference anisotropy metrics reported next to IsoScore: sampled average
// cosine similarity and the partition-function isotropy ratio.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "isoscope/geometry.hpp"

namespace isoscope {

struct BaselineResult {
  double avg_cosine = 0.0;
  double partition_score = 0.0;
};

inline constexpr std::size_t kDefaultCosinePairs = 100000;

/// Mean cosine similarity over `sample_pairs` uniformly drawn pairs of distinct
/// rows. Pairs touching a zero-norm row are redrawn.
inline double avg_cosine_similarity(const PointCloud& cloud,
                                    std::size_t sample_pairs = kDefaultCosinePairs,
                                    std::uint64_t seed = 0) {
  detail::require_rows(cloud, 2);
  if (sample_pairs == 0) fail(ErrorKind::InvalidArgument, "sample_pairs must be positive");

  const Matrix& data = cloud.matrix();
  const Vector norms = data.rowwise().norm();
  const auto zero_rows = static_cast<Eigen::Index>((norms.array() == 0.0).count());
  if (2 * zero_rows > data.rows()) {
    fail(ErrorKind::DegenerateCloud, "more than half of the rows have zero norm");
  }
  if (data.rows() - zero_rows < 2) {
    fail(ErrorKind::DegenerateCloud, "fewer than two nonzero rows");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.rows() - 1);
  double sum = 0.0;
  for (std::size_t drawn = 0; drawn < sample_pairs;) {
    const Eigen::Index a = pick(rng);
    const Eigen::Index b = pick(rng);
    if (a == b || norms(a) == 0.0 || norms(b) == 0.0) continue;
    sum += data.row(a).dot(data.row(b)) / (norms(a) * norms(b));
    ++drawn;
  }
  return sum / static_cast<double>(sample_pairs);
}

/// min_c Z(c) / max_c Z(c) with Z(c) = sum_i exp(c . x_i), c over the +/- unit
/// eigenvectors of the centered covariance. Evaluated in log space.
inline double partition_isotropy(const PointCloud& cloud) {
  detail::require_rows(cloud, 2);
  detail::require_valid_spread(cloud);
  const auto pairs = detail::sorted_eigenpairs(covariance(cloud), true);

  const Matrix projections = cloud.matrix() * pairs.vectors;  // N x n
  double log_min = std::numeric_limits<double>::infinity();
  double log_max = -std::numeric_limits<double>::infinity();
  auto log_partition = [](const auto& z) {
    const double shift = z.maxCoeff();
    return shift + std::log((z.array() - shift).exp().sum());
  };
  for (Eigen::Index k = 0; k < projections.cols(); ++k) {
    const Vector z = projections.col(k);
    for (const double lz : {log_partition(z), log_partition(Vector(-z))}) {
      log_min = std::min(log_min, lz);
      log_max = std::max(log_max, lz);
    }
  }
  return std::exp(log_min - log_max);
}

inline BaselineResult compute_baselines(const PointCloud& cloud,
                                        std::size_t sample_pairs = kDefaultCosinePairs,
                                        std::uint64_t seed = 0) {
  return BaselineResult{avg_cosine_similarity(cloud, sample_pairs, seed),
                        partition_isotropy(cloud)};
}

}  // namespace isoscope
