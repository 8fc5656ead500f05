#pragma once

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ctssl {

/// Keeps freed tensor buffers in the process heap instead of returning them
/// to the system after every training step.
inline void retain_heap_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif
}

/// Worker cap from the N2I_THREADS environment variable (default: hardware
/// concurrency).
inline int default_thread_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("N2I_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) return cap;
  }
  return hw;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Item i always runs
/// on worker i % threads; results must be written to per-item slots so the
/// outcome is independent of scheduling. The first exception is rethrown.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = threads < n ? threads : n;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace ctssl
