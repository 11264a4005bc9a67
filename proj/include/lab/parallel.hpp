#pragma once

#include <cstddef>
#include <functional>

namespace lab {

// Worker count: LAB_THREADS if set and positive, otherwise the hardware
// concurrency (at least 1).
std::size_t thread_count();

// Runs fn(i) for i in [0, n) across worker threads. Callers write results into
// per-index slots so outcomes do not depend on scheduling. The exception from
// the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lab
