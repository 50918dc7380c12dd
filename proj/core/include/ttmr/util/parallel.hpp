#pragma once

#include <cstddef>
#include <functional>

namespace ttmr {

/// Worker count: hardware concurrency, capped by the TTM_THREADS environment variable when set.
std::size_t worker_count();

/// Calls fn(i) for i in [0, n) over up to worker_count() threads. Each index runs exactly once;
/// callers write results into per-index slots so output does not depend on scheduling. The first
/// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ttmr
