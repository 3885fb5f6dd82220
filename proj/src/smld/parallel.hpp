#pragma once

#include <cstddef>
#include <functional>

namespace smld {

/// Worker cap: SMLD_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Work is split statically across at most
/// worker_count() threads; callers make results independent of the split.
/// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace smld
