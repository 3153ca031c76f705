#pragma once

// Minimal fork-join helper with a process-wide thread cap.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace isq {

inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{std::max(1, int(std::thread::hardware_concurrency()))};
  return cap;
}

inline void set_num_threads(int n) { thread_cap() = std::max(1, n); }
inline int num_threads() { return thread_cap(); }

/// Runs f(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend only on n,
/// so callers writing into per-index slots get identical results for any thread count.
template <class F>
void parallel_for(std::size_t n, F&& f, std::size_t chunk = 1024) {
  const std::size_t chunks = (n + chunk - 1) / chunk;
  const int nt = std::min<std::size_t>(num_threads(), chunks);
  if (nt <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) f(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t c; (c = next++) < chunks && !failed;) {
      try {
        f(c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace isq
