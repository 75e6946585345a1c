#pragma once

#include <cstddef>
#include <functional>

namespace fbench {

// Calls fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown by any call is rethrown after all workers have stopped.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

unsigned default_workers();

}  // namespace fbench
