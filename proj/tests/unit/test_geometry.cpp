#include <cmath>
#include <limits>

#include "support.hpp"

using namespace isoscope;
using test_support::error_kind_of;
using test_support::random_cloud;

TEST(PointCloud, RejectsEmptyAndNonFinite) {
  EXPECT_EQ(error_kind_of([] { PointCloud(Matrix(0, 3)); }), ErrorKind::InvalidCloud);
  EXPECT_EQ(error_kind_of([] { PointCloud(Matrix(3, 0)); }), ErrorKind::InvalidCloud);
  Matrix m = Matrix::Zero(3, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(error_kind_of([&] { PointCloud{m}; }), ErrorKind::InvalidCloud);
  m(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_EQ(error_kind_of([&] { PointCloud{m}; }), ErrorKind::InvalidCloud);
}

TEST(Covariance, MatchesHandComputation) {
  Matrix m(4, 2);
  m << 1, 2,  //
      3, 2,   //
      5, 6,   //
      7, 6;
  // means (4, 4); deviations (-3,-2), (-1,-2), (1,2), (3,2)
  const Matrix c = covariance(PointCloud(m));
  EXPECT_NEAR(c(0, 0), 20.0 / 3.0, 1e-12);
  EXPECT_NEAR(c(1, 1), 16.0 / 3.0, 1e-12);
  EXPECT_NEAR(c(0, 1), 16.0 / 3.0, 1e-12);
  EXPECT_NEAR(c(1, 0), 16.0 / 3.0, 1e-12);
  const Matrix p = covariance(PointCloud(m), CovarianceDenominator::Population);
  EXPECT_NEAR(p(0, 0), 5.0, 1e-12);
}

TEST(Pca, ReorientedCovarianceIsDiagonal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 11);
    const auto cloud = random_cloud(seed, n, 10 * n);
    const auto pca = pca_reorient(cloud);
    const Matrix c = covariance(pca.reoriented);
    const double scale = c.diagonal().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_NEAR(c(i, i), pca.variances.values(i), 1e-10 * scale);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) EXPECT_NEAR(c(i, j), 0.0, 1e-10 * scale);
      }
      if (i > 0) EXPECT_GE(pca.variances.values(i - 1), pca.variances.values(i));
    }
    EXPECT_TRUE((pca.axes.transpose() * pca.axes).isApprox(Matrix::Identity(n, n), 1e-12));
    EXPECT_TRUE(principal_variances(cloud).values.isApprox(pca.variances.values, 1e-12));
    // Total variance is preserved.
    EXPECT_NEAR(pca.variances.total(), covariance(cloud).trace(), 1e-10 * scale * n);
  }
}

TEST(Pca, AxisAlignedCloudKeepsAxisOrderOnTies) {
  // Equal variances on axes 2 and 0; the tie is ordered by original axis.
  Matrix m = Matrix::Zero(4, 3);
  m(0, 0) = 1;
  m(1, 0) = -1;
  m(2, 2) = 1;
  m(3, 2) = -1;
  const auto pca = pca_reorient(PointCloud(m));
  EXPECT_NEAR(std::abs(pca.axes(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(pca.axes(2, 1)), 1.0, 1e-12);
  EXPECT_GT(pca.axes(0, 0), 0.0);
  EXPECT_NEAR(pca.variances.values(2), 0.0, 1e-15);
}

TEST(Spectrum, RankKBeyondIndexKIsNegligible) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (Eigen::Index k : {1, 2, 5, 9}) {
    Matrix a(200, k), b(k, 32);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
    const auto s = svd_spectrum(PointCloud(a * b), Centering::Raw);
    EXPECT_GT(s.normalized(k - 1), 1e-3);
    for (Eigen::Index i = k; i < s.normalized.size(); ++i) {
      EXPECT_LE(s.normalized(i), 1e-10) << "k=" << k << " i=" << i;
    }
    EXPECT_DOUBLE_EQ(s.normalized(0), 1.0);
  }
}

TEST(Spectrum, CenteredSquaresMatchPcaVariances) {
  for (std::uint64_t seed = 40; seed < 60; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 13);
    const auto cloud = random_cloud(seed, n, 6 * n + 3);
    const auto s = svd_spectrum(cloud);
    const auto v = principal_variances(cloud).values;
    const double lead = v(0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double from_svd = s.singular_values(i) * s.singular_values(i) /
                              static_cast<double>(cloud.size() - 1);
      EXPECT_NEAR(from_svd / lead, v(i) / lead, 1e-8);
    }
  }
}

TEST(Spectrum, RawKeepsTheMeanDirection) {
  auto spec = CloudSpec::isotropic(6, 500, 3);
  spec.offset = std::vector<double>{30, 0, 0, 0, 0, 0};
  const auto cloud = generate_gaussian(spec);
  const auto raw = svd_spectrum(cloud, Centering::Raw);
  const auto centered = svd_spectrum(cloud, Centering::Centered);
  EXPECT_LT(raw.normalized(1), 0.1);
  EXPECT_GT(centered.normalized(5), 0.7);
}

TEST(Spectrum, GaussianMinMaxRatioFollowsAspectRatio) {
  // 1000 x 64: the extreme singular values sit near 1 -+ sqrt(64/1000).
  const auto cloud = generate_gaussian(CloudSpec::isotropic(64, 1000, 42));
  const auto s = svd_spectrum(cloud);
  const double ratio = s.normalized(63);
  const double edge = (1.0 - std::sqrt(0.064)) / (1.0 + std::sqrt(0.064));
  EXPECT_GE(ratio, 0.5);
  EXPECT_LT(ratio, 0.7);
  EXPECT_NEAR(ratio, edge, 0.06);
}

TEST(Spectrum, ZeroMatrixIsDegenerate) {
  EXPECT_EQ(error_kind_of([] { svd_spectrum(PointCloud(Matrix::Zero(5, 3)), Centering::Raw); }),
            ErrorKind::DegenerateCloud);
  EXPECT_EQ(error_kind_of([] { svd_spectrum(PointCloud(Matrix::Constant(5, 3, 2.0))); }),
            ErrorKind::DegenerateCloud);
}

TEST(Center, ColumnMeansVanish) {
  const auto c = center(random_cloud(1, 7, 30));
  EXPECT_LT(c.matrix().colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
}
