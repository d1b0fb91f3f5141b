#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace afd {

namespace detail {

inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> value{0};
  return value;
}

inline thread_local bool inside_parallel_region = false;

}  // namespace detail

/// Worker count used by parallel_chunks. 0 means "all hardware threads".
inline void set_thread_count(unsigned n) { detail::thread_setting().store(n); }

inline unsigned thread_count() {
  unsigned n = detail::thread_setting().load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs body(chunk) for chunk = 0..n_chunks-1 on the configured workers.
///
/// Work is split into chunks whose boundaries are chosen by the caller, never
/// by the thread count, and callers reduce per-chunk partials in chunk order,
/// so results are bit-identical for every worker count. Nested calls run
/// serially on the calling thread.
template <class Body>
void parallel_chunks(std::size_t n_chunks, Body&& body) {
  const unsigned workers =
      detail::inside_parallel_region ? 1u : static_cast<unsigned>(std::min<std::size_t>(thread_count(), n_chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    detail::inside_parallel_region = true;
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) break;
      try {
        body(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_chunks);
      }
    }
    detail::inside_parallel_region = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Fixed-size chunking of [0, n).
struct ChunkRange {
  std::size_t n;
  std::size_t chunk;

  std::size_t count() const { return n == 0 ? 0 : (n + chunk - 1) / chunk; }
  std::size_t begin(std::size_t c) const { return c * chunk; }
  std::size_t end(std::size_t c) const { return std::min(n, (c + 1) * chunk); }
};

}  // namespace afd
