#include "hdrsplat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hdrsplat {
namespace {

std::atomic<int> g_workers{-1};
thread_local bool t_inside_worker = false;

int resolve_from_env() {
  int requested = 0;
  if (const char* env = std::getenv("HDRSPLAT_THREADS")) {
    requested = std::atoi(env);
  }
  if (requested <= 0) {
    requested = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::max(1, requested);
}

}  // namespace

int worker_count() {
  int w = g_workers.load();
  if (w < 0) {
    w = resolve_from_env();
    g_workers.store(w);
  }
  return w;
}

void set_worker_count(int workers) {
  g_workers.store(workers <= 0 ? resolve_from_env() : workers);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1 || t_inside_worker) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    t_inside_worker = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
    t_inside_worker = false;
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace hdrsplat
