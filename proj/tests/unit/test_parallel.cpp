#include <stdexcept>

#include "support.hpp"

using namespace isoscope;

TEST(ParallelMap, ResultsByIndex) {
  for (std::size_t workers : {1u, 2u, 7u, 64u}) {
    const auto out = parallel_map<int>(50, workers, [](std::size_t i) { return int(i * i); });
    ASSERT_EQ(out.size(), 50u);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], int(i * i));
  }
  EXPECT_TRUE(parallel_map<int>(0, 4, [](std::size_t) { return 1; }).empty());
}

TEST(ParallelMap, LowestIndexErrorWins) {
  auto fn = [](std::size_t i) -> int {
    if (i == 9 || i == 30) throw std::runtime_error("fail " + std::to_string(i));
    return 0;
  };
  for (std::size_t workers : {1u, 4u}) {
    try {
      parallel_map<int>(40, workers, fn);
      ADD_FAILURE() << "expected an exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "fail 9");
    }
  }
}

TEST(ParallelMap, WorkerCountFromEnvironment) {
  ::setenv("ISOSCOPE_WORKERS", "3", 1);
  EXPECT_EQ(default_worker_count(), 3u);
  ::unsetenv("ISOSCOPE_WORKERS");
  EXPECT_GE(default_worker_count(), 1u);
}
