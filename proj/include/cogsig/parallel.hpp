#pragma once

#include <cstddef>
#include <functional>

namespace cogsig {

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Callers write results into per-index slots, so output never
// depends on scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace cogsig
