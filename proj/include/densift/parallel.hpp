#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace densift {

// Worker count used by parallel_for. 0 means "not set yet": fall back to the
// DENSIFT_THREADS environment variable, then to hardware_concurrency().
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> n{0};
  return n;
}

inline void set_thread_count(int n) { thread_count_slot().store(n > 0 ? n : 0); }

inline int thread_count() {
  int n = thread_count_slot().load();
  if (n > 0) return n;
  if (const char* env = std::getenv("DENSIFT_THREADS")) {
    int e = std::atoi(env);
    if (e > 0) return e;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(i) for i in [begin, end). Each index is processed exactly once and
// writes only to its own outputs, so results do not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn, int n_threads = 0) {
  if (begin >= end) return;
  std::size_t count = end - begin;
  int nt = n_threads > 0 ? n_threads : thread_count();
  nt = static_cast<int>(std::min<std::size_t>(nt, count));
  if (nt <= 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{begin};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(nt);
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= end || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
        return;
      }
    }
  };
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace densift
