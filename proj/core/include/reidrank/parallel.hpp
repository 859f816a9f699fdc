#pragma once

#include <cstddef>
#include <functional>

namespace reidrank {

/// Worker count from REIDRANK_THREADS, else hardware concurrency. Always >= 1.
unsigned default_thread_count();

/// Resolves a requested count; 0 means default_thread_count().
unsigned resolve_threads(unsigned requested);

/// Runs body(begin, end) over contiguous chunks of [0, count). Chunks are
/// disjoint, so bodies that write only to their own indices produce results
/// independent of the thread count. Exceptions from workers are rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace reidrank
