#pragma once

#include <cstddef>
#include <functional>

namespace jellium {

// Worker count: JELLIUM_THREADS if set and positive, else hardware concurrency.
int thread_count();

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker and
// results must be written to per-index slots, so output is deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace jellium
