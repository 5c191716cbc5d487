#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace compenkit {

// Global worker count for op-internal parallelism. 0 = use all hardware threads.
void set_num_threads(int n);
int num_threads();

// Returns the thread count that will actually be used for a loop of size n.
int effective_threads(std::int64_t n);

// Static-scheduled parallel loop. Each index is written by exactly one thread,
// so results are identical for any thread count as long as the body only
// writes to locations owned by its index.
template <class F>
void parallel_for(std::int64_t n, F&& f) {
    const int t = effective_threads(n);
    if (t <= 1) {
        for (std::int64_t i = 0; i < n; ++i) f(i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for num_threads(t) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) f(i);
#else
    for (std::int64_t i = 0; i < n; ++i) f(i);
#endif
}

} // namespace compenkit
