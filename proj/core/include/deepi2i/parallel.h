#pragma once

#include <cstdint>
#include <functional>

namespace deepi2i {

/// Worker count of the shared pool (caller thread included).
int worker_count();

/// Number of ranges parallel_for will split [0, n) into.
int chunk_count(int64_t n);

/// Runs fn(chunk, begin, end) over a fixed contiguous partition of [0, n).
/// The partition depends only on (n, worker_count), and each range is
/// processed by exactly one thread, so results are deterministic whenever
/// ranges write disjoint outputs.
void parallel_for(int64_t n, const std::function<void(int, int64_t, int64_t)>& fn);

}  // namespace deepi2i
