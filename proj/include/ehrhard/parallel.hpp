#pragma once

#include <cstddef>
#include <functional>

namespace ehrhard {

// Worker count: hardware concurrency capped by EHRHARD_LAB_THREADS.
unsigned worker_count();

// Calls body(begin, end) over disjoint contiguous chunks of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ehrhard
