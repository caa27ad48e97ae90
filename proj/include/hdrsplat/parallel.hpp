#pragma once

#include <cstddef>
#include <functional>

namespace hdrsplat {

// Worker count used by parallel_for. Resolved from HDRSPLAT_THREADS on first
// use (0 or unset means hardware concurrency) unless overridden.
int worker_count();
void set_worker_count(int workers);

// Runs fn(i) for i in [0, n). Calls made from inside a worker run serially.
// Results must not depend on scheduling: callers write to disjoint slots and
// reduce afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hdrsplat
