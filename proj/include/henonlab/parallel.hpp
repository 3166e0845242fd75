#pragma once

#include <cstddef>
#include <functional>

namespace henon {

/// Caps the worker count used by parallel sweeps. 0 restores the default
/// (hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(begin, end) over disjoint chunks of [0, n). Chunk boundaries
/// depend only on n and the chunk size, never on the thread count, so
/// callers that reduce per-chunk results in chunk order are deterministic.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t chunk_index, std::size_t begin, std::size_t end)>& body);

/// Convenience wrapper: body(i) for every i in [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace henon
