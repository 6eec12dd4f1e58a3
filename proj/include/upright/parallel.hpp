#pragma once

#include <cstddef>
#include <functional>

namespace upright {

/// Upper bound on worker threads used by parallel_for; 0 restores the
/// hardware default.
void set_thread_limit(unsigned n);
unsigned thread_limit();

/// Calls fn(i) for i in [0, n). Each index must write only its own output so
/// results do not depend on scheduling. The exception of the lowest failing
/// index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace upright
