#pragma once

#include <functional>

namespace meshret {

// Worker count from MESH_RETARGET_THREADS, capped by `requested` when
// positive; at least 1.
int worker_count(int requested = 0);

// Runs body(i) for i in [0, n) on up to `threads` workers. The first
// exception thrown by a body is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace meshret
