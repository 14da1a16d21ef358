#include "qdmr/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace qdmr {

int resolve_thread_count(int requested) {
  if (requested <= 0) {
    if (const char* env = std::getenv("QDMR_THREADS")) {
      requested = std::atoi(env);
    }
  }
  if (requested <= 0) {
    requested = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::max(1, requested);
}

void parallel_for_indexed(
    std::size_t n, int threads,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  threads = std::max(1, threads);
  if (threads == 1 || n < 4096) {
    body(0, 0, n);
    return;
  }
  std::size_t workers = std::min<std::size_t>(threads, n);
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  parallel_for_indexed(
      n, threads,
      [&body](std::size_t, std::size_t begin, std::size_t end) {
        body(begin, end);
      });
}

}  // namespace qdmr
