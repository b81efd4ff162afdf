#pragma once

#include <cstddef>
#include <functional>

namespace cdk {

/// Worker count: CDK_THREADS if set (min 1), else hardware concurrency.
int thread_budget();

/// Runs fn(i) for i in [0, n). Work items must be independent; each writes
/// only to its own output slot, so results never depend on scheduling order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cdk
