#pragma once

#include <cstddef>
#include <functional>

namespace nmd {

/// Worker count: NMD_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int thread_budget();

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = thread_budget()).
/// Tasks are claimed dynamically; callers write results into per-index slots
/// so that the outcome does not depend on scheduling. The first exception
/// thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace nmd
