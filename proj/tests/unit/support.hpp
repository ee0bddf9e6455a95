#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "isoscope/isoscope.hpp"

namespace test_support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(ISOSCOPE_TEST_DATA); }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "isoscope_" + tag;
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = fs::temp_directory_path() / name;
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// Gaussian cloud with a random log-uniform variance profile, random rotation and offset.
inline isoscope::PointCloud random_cloud(std::uint64_t seed, Eigen::Index n, Eigen::Index N) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> log_var(-3.0, 2.0);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  isoscope::CloudSpec spec;
  spec.n = n;
  spec.N = N;
  for (Eigen::Index j = 0; j < n; ++j) spec.variance_profile.push_back(std::exp(log_var(rng)));
  spec.rotation_seed = rng();
  std::vector<double> offset;
  for (Eigen::Index j = 0; j < n; ++j) offset.push_back(shift(rng));
  spec.offset = offset;
  spec.sample_seed = rng();
  return isoscope::generate_gaussian(spec);
}

/// Rows +-2 e_i for i < k: covariance with exactly k equal nonzero variances.
inline isoscope::PointCloud cross_polytope(Eigen::Index n, Eigen::Index k) {
  isoscope::Matrix m = isoscope::Matrix::Zero(2 * k, n);
  for (Eigen::Index i = 0; i < k; ++i) {
    m(2 * i, i) = 2.0;
    m(2 * i + 1, i) = -2.0;
  }
  return isoscope::PointCloud(std::move(m));
}

inline isoscope::GroupKey key(isoscope::ModelType model, const std::string& target,
                              isoscope::Side side = isoscope::Side::Decoder, int layer = 6,
                              const std::string& source = "en",
                              const std::string& dataset = "toy") {
  isoscope::GroupKey k;
  k.model_type = model;
  k.dataset_tag = dataset;
  k.source_lang = source;
  k.target_lang = target;
  k.side = side;
  k.layer = layer;
  return k;
}

/// One record per sentence id, T tokens each, values from a seeded Gaussian
/// shifted by `shift` along axis `axis`.
inline std::vector<isoscope::HiddenStateRecord> make_records(
    const isoscope::GroupKey& meta, const std::vector<std::uint64_t>& ids, Eigen::Index n,
    std::uint64_t seed, double shift = 0.0, Eigen::Index axis = 0, Eigen::Index tokens = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<isoscope::HiddenStateRecord> out;
  for (auto id : ids) {
    isoscope::HiddenStateRecord r;
    r.sentence_id = id;
    r.meta = meta;
    r.tokens.resize(tokens, n);
    for (Eigen::Index t = 0; t < tokens; ++t)
      for (Eigen::Index j = 0; j < n; ++j) r.tokens(t, j) = normal(rng);
    r.tokens.col(axis).array() += shift;
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<std::uint64_t> iota_ids(std::uint64_t count, std::uint64_t first = 0) {
  std::vector<std::uint64_t> ids;
  for (std::uint64_t i = 0; i < count; ++i) ids.push_back(first + i);
  return ids;
}

template <typename Fn>
isoscope::ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const isoscope::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected isoscope::Error";
  return isoscope::ErrorKind::IoError;
}

template <typename Fn>
std::string error_message_of(Fn&& fn) {
  try {
    fn();
  } catch (const isoscope::Error& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected isoscope::Error";
  return {};
}

}  // namespace test_support
