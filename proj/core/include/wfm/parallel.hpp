#pragma once

#include <functional>

namespace wfm {

/// Worker count: WFM_THREADS when set (clamped to >= 1), otherwise the
/// hardware concurrency.
int thread_count();

/// Runs fn(i) for i in [0, n) across workers. Callers keep determinism by
/// writing results per index and reducing sequentially afterwards.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace wfm
