#pragma once

#include <cstddef>
#include <functional>

namespace spdescore {

/// Current worker cap. Defaults to the hardware concurrency; 0 is never returned.
unsigned max_threads();

/// Set the worker cap (0 restores the hardware default).
void set_max_threads(unsigned n);

/// Run fn(begin, end) over disjoint chunks of [0, n), possibly on several
/// threads. Work item i must depend only on i (per-item RNG streams, disjoint
/// output slots), which makes the result independent of the chunking.
void parallel_for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace spdescore
