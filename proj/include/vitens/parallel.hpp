#pragma once

#include <cstddef>
#include <functional>

namespace vitens {

// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware
// concurrency, or VITENS_THREADS when set). The first exception thrown by
// any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t workers = 0);

std::size_t default_workers();

}  // namespace vitens
