#pragma once

// Seeded synthetic clouds: Gaussians with a prescribed principal-variance
// profile, and labelled multi-cluster clouds that mimic language separation.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isoscope/geometry.hpp"

namespace isoscope {

struct CloudSpec {
  Eigen::Index n = 2;
  Eigen::Index N = 2;
  std::vector<double> variance_profile;  // length n, nonnegative
  std::optional<std::uint64_t> rotation_seed;
  std::optional<std::vector<double>> offset;  // length n
  std::uint64_t sample_seed = 0;

  void validate() const {
    if (n < 1 || N < 1) fail(ErrorKind::InvalidArgument, "cloud spec needs n >= 1 and N >= 1");
    if (static_cast<Eigen::Index>(variance_profile.size()) != n) {
      fail(ErrorKind::InvalidArgument, "variance_profile has " +
                                           std::to_string(variance_profile.size()) +
                                           " entries, expected n=" + std::to_string(n));
    }
    for (double v : variance_profile) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(ErrorKind::InvalidArgument, "variance_profile entries must be finite and >= 0");
      }
    }
    if (offset && static_cast<Eigen::Index>(offset->size()) != n) {
      fail(ErrorKind::InvalidArgument, "offset length must equal n");
    }
  }

  static CloudSpec isotropic(Eigen::Index n, Eigen::Index N, std::uint64_t seed) {
    CloudSpec spec;
    spec.n = n;
    spec.N = N;
    spec.variance_profile.assign(static_cast<std::size_t>(n), 1.0);
    spec.sample_seed = seed;
    return spec;
  }
};

inline CloudSpec cloud_spec_from_json(const nlohmann::json& j) {
  try {
    CloudSpec spec;
    spec.n = j.at("n").get<Eigen::Index>();
    spec.N = j.at("N").get<Eigen::Index>();
    spec.variance_profile = j.at("variance_profile").get<std::vector<double>>();
    if (j.contains("rotation_seed") && !j.at("rotation_seed").is_null()) {
      spec.rotation_seed = j.at("rotation_seed").get<std::uint64_t>();
    }
    if (j.contains("offset") && !j.at("offset").is_null()) {
      spec.offset = j.at("offset").get<std::vector<double>>();
    }
    spec.sample_seed = j.value("sample_seed", std::uint64_t{0});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("bad cloud spec: ") + e.what());
  }
}

/// Haar-distributed orthogonal matrix: QR of a seeded Gaussian matrix with the
/// signs of R's diagonal folded into Q.
inline Matrix random_orthogonal(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (r(k, k) < 0) q.col(k) *= -1.0;
  }
  return q;
}

namespace detail {

inline void fill_gaussian_rows(Matrix& out, Eigen::Index first, Eigen::Index count,
                               const std::vector<double>& profile, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index i = first; i < first + count; ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = std::sqrt(profile[static_cast<std::size_t>(j)]) * normal(rng);
    }
  }
}

}  // namespace detail

inline PointCloud generate_gaussian(const CloudSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.sample_seed);
  Matrix data(spec.N, spec.n);
  detail::fill_gaussian_rows(data, 0, spec.N, spec.variance_profile, rng);
  if (spec.rotation_seed) data = data * random_orthogonal(spec.n, *spec.rotation_seed).transpose();
  if (spec.offset) {
    const Eigen::Map<const Eigen::RowVectorXd> shift(spec.offset->data(), spec.n);
    data.rowwise() += shift;
  }
  return PointCloud(std::move(data));
}

struct LabeledCloud {
  PointCloud cloud;
  std::vector<int> labels;  // cluster index per row
};

/// k unit-variance isotropic clusters of `per_cluster` rows each. Cluster j is
/// centred at (separation / sqrt 2) * e_j, so every pair of means is exactly
/// `separation` apart. Rows come from one RNG stream in cluster order: with
/// separation 0 the result equals generate_gaussian of k * per_cluster rows.
inline LabeledCloud generate_language_clusters(int k, Eigen::Index per_cluster, Eigen::Index n,
                                               double separation, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::InvalidArgument, "need at least 2 clusters");
  if (!(separation >= 0.0)) fail(ErrorKind::InvalidArgument, "separation must be >= 0");
  if (n < k) fail(ErrorKind::InvalidArgument, "need n >= k so cluster offsets use distinct axes");
  if (per_cluster < 1) fail(ErrorKind::InvalidArgument, "per_cluster must be positive");

  const std::vector<double> unit(static_cast<std::size_t>(n), 1.0);
  std::mt19937_64 rng(seed);
  Matrix data(per_cluster * k, n);
  LabeledCloud out;
  out.labels.reserve(static_cast<std::size_t>(per_cluster * k));
  const double shift = separation / std::sqrt(2.0);
  for (int c = 0; c < k; ++c) {
    const Eigen::Index first = c * per_cluster;
    detail::fill_gaussian_rows(data, first, per_cluster, unit, rng);
    data.block(first, c, per_cluster, 1).array() += shift;
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(per_cluster), c);
  }
  out.cloud = PointCloud(std::move(data));
  return out;
}

/// Rows of `labeled` belonging to one cluster.
inline PointCloud cluster_rows(const LabeledCloud& labeled, int label) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < labeled.labels.size(); ++i) {
    if (labeled.labels[i] == label) idx.push_back(static_cast<Eigen::Index>(i));
  }
  if (idx.empty()) fail(ErrorKind::InsufficientData, "no rows labelled " + std::to_string(label));
  Matrix rows(static_cast<Eigen::Index>(idx.size()), labeled.cloud.dim());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = labeled.cloud.matrix().row(idx[i]);
  }
  return PointCloud(std::move(rows));
}

}  // namespace isoscope
