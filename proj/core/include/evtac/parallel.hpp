#pragma once

#include <cstddef>
#include <functional>

namespace evtac {

/// Thread count from EVTAC_THREADS, falling back to 1.
int default_thread_count();

/// Resolves a user-supplied count: <= 0 means default_thread_count().
int resolve_threads(int requested);

/// Splits [0, n) into `threads` contiguous chunks and runs fn(chunk_index, begin, end)
/// on each. Chunk boundaries depend only on n and threads, so callers that
/// merge per-chunk results in chunk order get thread-count-independent output
/// as long as their merge is order-insensitive or ordered by chunk.
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(int chunk, std::size_t begin, std::size_t end)>& fn);

}  // namespace evtac
