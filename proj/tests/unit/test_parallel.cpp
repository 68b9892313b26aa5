#include <atomic>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "evtac/parallel.hpp"

namespace evtac {
namespace {

TEST(ParallelChunks, CoversRangeOnceWithFixedBoundaries) {
  for (std::size_t n : {0u, 1u, 7u, 100u}) {
    for (int threads : {1, 2, 3, 8}) {
      std::vector<int> hits(n, 0);
      std::mutex mu;
      std::vector<std::pair<std::size_t, std::size_t>> bounds;
      parallel_chunks(n, threads, [&](int, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) ++hits[i];
        std::lock_guard lock(mu);
        bounds.emplace_back(b, e);
      });
      for (int h : hits) EXPECT_EQ(h, 1);
      if (threads > 1 && n >= 2) {
        const std::size_t chunks = std::min<std::size_t>(threads, n);
        EXPECT_EQ(bounds.size(), chunks);
        for (const auto& [b, e] : bounds) EXPECT_LE(e - b, n / chunks + 1);
      }
    }
  }
}

TEST(ParallelChunks, RethrowsWorkerErrors) {
  EXPECT_THROW(parallel_chunks(10, 3,
                               [](int chunk, std::size_t, std::size_t) {
                                 if (chunk == 1) throw std::runtime_error("boom");
                               }),
               std::runtime_error);
}

TEST(Threads, ResolveFromEnvironment) {
  const char* old = std::getenv("EVTAC_THREADS");
  const std::string saved = old ? old : "";
  ::setenv("EVTAC_THREADS", "3", 1);
  EXPECT_EQ(default_thread_count(), 3);
  EXPECT_EQ(resolve_threads(0), 3);
  EXPECT_EQ(resolve_threads(2), 2);
  ::setenv("EVTAC_THREADS", "zero", 1);
  EXPECT_EQ(default_thread_count(), 1);
  ::unsetenv("EVTAC_THREADS");
  EXPECT_EQ(resolve_threads(-1), 1);
  if (old) ::setenv("EVTAC_THREADS", saved.c_str(), 1);
}

}  // namespace
}  // namespace evtac
