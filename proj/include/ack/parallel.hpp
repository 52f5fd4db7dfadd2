#pragma once

#include <cstddef>
#include <functional>

namespace ack {

// Worker cap from ACK_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, count) on up to worker_count() threads. Each index
// must write only its own outputs; callers reduce results in index order so
// thread count never changes numbers.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace ack
