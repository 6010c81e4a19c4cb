#pragma once

#include <cstddef>
#include <functional>

namespace fbt {

/// Worker count: FBT_THREADS if set and positive, otherwise the hardware concurrency.
unsigned worker_count();

/// Calls task(i) for i in [0, n) on up to worker_count() threads.
/// Tasks must write only to their own output slot; callers reduce in index order.
/// The first exception thrown by any task is rethrown after all workers join. Calls made from
/// inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace fbt
