#pragma once

#include <cstddef>
#include <functional>

namespace fedevo {

/// Upper bound on worker threads used by parallel_for (0 = hardware concurrency).
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(i) for i in [0, n). Indices are handed out dynamically; calls
/// from inside a worker run serially so nested use never oversubscribes.
/// The body must only write to per-index state for results to be deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t min_parallel = 16);

}  // namespace fedevo
