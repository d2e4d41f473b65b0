#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace prosyn {

/// Default worker cap, set once by the CLI --threads flag.
inline int& default_threads() {
  static int t = int(std::thread::hardware_concurrency());
  return t;
}

/// Chunked parallel loop over [0, n). Chunk boundaries depend only on n,
/// never on the worker count, and each index writes its own output slot,
/// so results are identical for any number of threads.
template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn, int threads = 0) {
  if (n <= 0) return;
  if (threads <= 0) threads = default_threads();
  if (threads < 1) threads = 1;

  const std::int64_t chunk = std::max<std::int64_t>(1, n / 256);
  const std::int64_t n_chunks = (n + chunk - 1) / chunk;

  if (threads == 1 || n_chunks == 1) {
    fn(std::int64_t(0), n);
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&]() {
    for (;;) {
      const std::int64_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      const std::int64_t begin = c * chunk;
      const std::int64_t end = std::min(n, begin + chunk);
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawn = int(std::min<std::int64_t>(threads, n_chunks));
  pool.reserve(spawn - 1);
  for (int i = 1; i < spawn; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace prosyn
