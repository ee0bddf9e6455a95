#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"

using namespace isoscope;
using test_support::cross_polytope;
using test_support::error_kind_of;
using test_support::random_cloud;

namespace {

VarianceDiagonal diag(std::vector<double> v) {
  return VarianceDiagonal{Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()))};
}

// Independent route: with the diagonal scaled to norm sqrt(n) the steps reduce
// to phi = tr(C)^2 / (n ||C||_F^2), a rotation-invariant quantity that needs
// no eigendecomposition.
double trace_frobenius_score(const PointCloud& cloud) {
  const Matrix c = covariance(cloud);
  const double n = static_cast<double>(c.rows());
  const double ratio = c.trace() * c.trace() / c.squaredNorm();
  return (ratio - 1.0) / (n - 1.0);
}

}  // namespace

TEST(IsoScoreClosedForm, EqualVariancesScoreOne) {
  for (int n = 2; n <= 64; n *= 2) {
    std::vector<double> v(static_cast<std::size_t>(n), 3.5);
    EXPECT_NEAR(isoscore_from_variances(diag(v)).score, 1.0, 1e-12) << "n=" << n;
  }
}

TEST(IsoScoreClosedForm, SingleAxisScoresZero) {
  for (int n = 2; n <= 64; n *= 2) {
    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    v[0] = 7.0;
    const auto r = isoscore_from_variances(diag(v));
    EXPECT_NEAR(r.score, 0.0, 1e-12) << "n=" << n;
    EXPECT_NEAR(r.phi, 1.0 / n, 1e-12);
  }
}

TEST(IsoScoreClosedForm, KOfNEqualVariances) {
  for (int n = 2; n <= 20; ++n) {
    for (int k = 1; k <= n; ++k) {
      std::vector<double> v(static_cast<std::size_t>(n), 0.0);
      for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = 0.25;
      const auto r = isoscore_from_variances(diag(v));
      EXPECT_NEAR(r.score, double(k - 1) / double(n - 1), 1e-12) << "n=" << n << " k=" << k;
      EXPECT_NEAR(r.phi, double(k) / n, 1e-12);
    }
  }
}

TEST(IsoScoreClosedForm, TenDimsFiveUsedFromCloud) {
  const auto r = isoscore(cross_polytope(10, 5));
  EXPECT_NEAR(r.score, 4.0 / 9.0, 1e-9);
  EXPECT_NEAR(r.score, 0.444444, 1e-6);
  EXPECT_EQ(r.n, 10);
  EXPECT_EQ(r.N, 10);
}

TEST(IsoScoreClosedForm, CrossPolytopeClouds) {
  for (int n : {2, 3, 8, 16}) {
    for (int k = 1; k <= n; ++k) {
      EXPECT_NEAR(isoscore(cross_polytope(n, k)).score, double(k - 1) / double(n - 1), 1e-9)
          << "n=" << n << " k=" << k;
    }
  }
}

TEST(IsoScoreClosedForm, VariancesOnHandChecked) {
  // (4, 1): norm sqrt 17, normalized (4, 1) * sqrt2 / sqrt17.
  const auto r = isoscore_from_variances(diag({4.0, 1.0}));
  const double a = 4.0 * std::sqrt(2.0 / 17.0);
  const double b = 1.0 * std::sqrt(2.0 / 17.0);
  const double delta = std::hypot(a - 1.0, b - 1.0) / std::sqrt(2.0 * (2.0 - std::sqrt(2.0)));
  EXPECT_NEAR(r.delta, delta, 1e-12);
  // tr^2 / ||.||^2 = 25 / 17
  EXPECT_NEAR(r.score, 25.0 / 17.0 - 1.0, 1e-12);
}

TEST(IsoScoreRoutes, TraceFrobeniusAgreesOnRandomClouds) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto n = static_cast<Eigen::Index>(2 + seed % 30);
    const auto cloud = random_cloud(seed, n, 5 * n + 7);
    EXPECT_NEAR(isoscore(cloud).score, trace_frobenius_score(cloud), 1e-10) << "seed " << seed;
  }
}

TEST(IsoScoreInvariance, RotationTranslationScaling) {
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 23);
    const auto cloud = random_cloud(seed, n, 4 * n + 11);
    const double base = isoscore(cloud).score;

    const Matrix q = random_orthogonal(n, seed * 7 + 1);
    const PointCloud rotated(cloud.matrix() * q);
    EXPECT_LT(std::abs(isoscore(rotated).score - base), 1e-8) << "rotation, seed " << seed;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    Eigen::RowVectorXd b(n);
    for (Eigen::Index j = 0; j < n; ++j) b(j) = u(rng);
    const PointCloud shifted(cloud.matrix().rowwise() + b);
    EXPECT_LT(std::abs(isoscore(shifted).score - base), 1e-8) << "translation, seed " << seed;

    for (double c : {1e-3, 0.5, 17.0, 1e4}) {
      const PointCloud scaled(cloud.matrix() * c);
      EXPECT_LT(std::abs(isoscore(scaled).score - base), 1e-8) << "scale " << c << ", seed " << seed;
    }
  }
}

TEST(IsoScoreInvariance, DenominatorDoesNotMatter) {
  for (std::uint64_t seed = 200; seed < 250; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 17);
    const auto cloud = random_cloud(seed, n, 3 * n + 2);
    const double s = isoscore(cloud, CovarianceDenominator::Sample).score;
    const double p = isoscore(cloud, CovarianceDenominator::Population).score;
    EXPECT_LT(std::abs(s - p), 1e-12) << "seed " << seed;
  }
}

TEST(IsoScoreInvariance, RowPermutation) {
  const auto cloud = random_cloud(3, 12, 80);
  Matrix m = cloud.matrix();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(9);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix shuffled(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.row(Eigen::Index(i)) = m.row(perm[i]);
  EXPECT_NEAR(isoscore(PointCloud(shuffled)).score, isoscore(cloud).score, 1e-10);
}

TEST(IsoScoreProperties, RangeOfOutputs) {
  for (std::uint64_t seed = 300; seed < 340; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 40);
    const auto r = isoscore(random_cloud(seed, n, 2 + static_cast<Eigen::Index>(seed % 90)));
    EXPECT_GE(r.score, 0.0);
    EXPECT_LE(r.score, 1.0);
    EXPECT_GE(r.phi, 1.0 / double(n) - 1e-15);
    EXPECT_LE(r.phi, 1.0);
  }
}

TEST(IsoScoreProperties, MoreUsedDimensionsNeverLowerScore) {
  // Raising one zero variance to the common level increases the score.
  for (int n = 3; n <= 12; ++n) {
    double last = -1.0;
    for (int k = 1; k <= n; ++k) {
      std::vector<double> v(static_cast<std::size_t>(n), 0.0);
      for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = 1.0;
      const double s = isoscore_from_variances(diag(v)).score;
      EXPECT_GT(s, last);
      last = s;
    }
  }
}

TEST(IsoScoreSampling, IsotropicGaussianNearOne) {
  const auto cloud = generate_gaussian(CloudSpec::isotropic(10, 50000, 20240229));
  EXPECT_GE(isoscore(cloud).score, 0.95);
}

TEST(IsoScoreSampling, RankOneCloudNearZero) {
  CloudSpec spec;
  spec.n = 10;
  spec.N = 5000;
  spec.variance_profile.assign(10, 0.0);
  spec.variance_profile[0] = 4.0;
  spec.rotation_seed = 5;
  spec.sample_seed = 6;
  EXPECT_LE(isoscore(generate_gaussian(spec)).score, 0.01);
}

TEST(IsoScoreErrors, Inputs) {
  EXPECT_EQ(error_kind_of([] { isoscore(PointCloud(Matrix::Ones(5, 1))); }),
            ErrorKind::InvalidDimension);
  EXPECT_EQ(error_kind_of([] { isoscore(PointCloud(Matrix::Ones(1, 4))); }),
            ErrorKind::DegenerateCloud);
  EXPECT_EQ(error_kind_of([] { isoscore(PointCloud(Matrix::Constant(6, 4, 3.25))); }),
            ErrorKind::DegenerateCloud);
  EXPECT_EQ(error_kind_of([] { isoscore(PointCloud()); }), ErrorKind::InvalidCloud);
  EXPECT_EQ(error_kind_of([] { isoscore_from_variances(diag({0.0, 0.0, 0.0})); }),
            ErrorKind::DegenerateCloud);
  EXPECT_EQ(error_kind_of([] { isoscore_from_variances(diag({1.0})); }),
            ErrorKind::InvalidDimension);
}

TEST(IsoScoreErrors, LargeConstantRowsAreDegenerate) {
  // Centering leaves only rounding noise here.
  EXPECT_EQ(error_kind_of([] { isoscore(PointCloud(Matrix::Constant(50, 8, 1e8 + 0.1))); }),
            ErrorKind::DegenerateCloud);
}

TEST(IsoScoreFlags, LowSample) {
  EXPECT_TRUE(is_low_sample(99, 10));
  EXPECT_FALSE(is_low_sample(100, 10));
  EXPECT_TRUE(is_low_sample(3000, 512));
}
