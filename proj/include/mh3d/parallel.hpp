#pragma once

#include <cstddef>
#include <functional>

namespace mh3d {

/// Runs body(i) for i in [0, n) on up to fft::thread_budget() threads.
/// Iterations must be independent. The first exception thrown by any
/// iteration is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mh3d
