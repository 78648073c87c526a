#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace loggas {

// Thread count resolution: explicit request > LOGGAS_THREADS > hardware.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LOGGAS_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Runs body(begin, end, chunk_index) over [0, n) split into fixed-size
// chunks. The decomposition depends only on n and chunk_size, never on the
// thread count, so callers that keep one accumulator per chunk and merge in
// chunk order get bit-identical floating-point results at any parallelism.
// The first exception thrown by any chunk is rethrown on the calling thread.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int threads,
                     Body&& body) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  auto run_chunk = [&](std::size_t c) {
    body(c * chunk_size, std::min(n, (c + 1) * chunk_size), c);
  };
  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        run_chunk(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Chunk size shared by every Monte Carlo reduction in the project. Part of
// the reproducibility contract: changing it changes chunk boundaries and
// therefore the rounding of merged sums.
inline constexpr std::size_t kReductionChunk = 1024;

}  // namespace loggas
