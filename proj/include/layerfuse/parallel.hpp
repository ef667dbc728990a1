#pragma once

#include <cstddef>
#include <functional>

namespace layerfuse {

/// Worker count: hardware concurrency, capped by the LASER_THREADS environment
/// variable when it holds a positive integer. Read on every call.
int resolve_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = resolve_thread_count()).
/// Indices are split into contiguous blocks, so results written per index do not
/// depend on the worker count. The first exception thrown by any call is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace layerfuse
