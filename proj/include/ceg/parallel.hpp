#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace ceg {

// Worker count from an explicit flag, else $CEG_THREADS, else 1.
unsigned resolve_threads(std::optional<unsigned> flag);

// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write
// results into per-index slots, so output never depends on scheduling.
// The first exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace ceg
