#ifndef STEERLAB_PARALLEL_HPP
#define STEERLAB_PARALLEL_HPP

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace steerlab {

// Worker count resolution: explicit value > STEERLAB_WORKERS env > hardware.
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("STEERLAB_WORKERS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Static block partition of [0, n). Each index is processed exactly once by a
// fixed worker, and fn(i) must write only to slot i of preallocated output,
// so results never depend on the worker count or schedule.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  workers = resolve_workers(workers);
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t lo = n * t / w;
    const std::size_t hi = n * (t + 1) / w;
    threads.emplace_back([lo, hi, t, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i, static_cast<int>(t));
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace steerlab

#endif  // STEERLAB_PARALLEL_HPP
