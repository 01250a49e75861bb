#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nvf {

// Global worker count for the OpenMP kernels. 0 = library default.
void set_num_threads(int n);
int num_threads();

// Static-schedule parallel loop. Results are deterministic as long as each
// index writes to its own slot; reductions must merge per-thread partials in
// thread order (see accumulate_ordered below).
template <class F>
void parallel_for(int64_t n, F&& body) {
#ifdef _OPENMP
    if (num_threads() != 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(num_threads())
        for (int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) body(i);
}

// Deterministic parallel reduction: splits [0,n) into per-thread static
// chunks, runs `body(i, partial)` accumulating into the thread's partial,
// then combines partials in thread-index order.
template <class T, class F>
T parallel_reduce(int64_t n, T init, F&& body) {
#ifdef _OPENMP
    int nt = num_threads();
    if (nt != 1 && n > 1) {
        int actual = 0;
        T partials[512];
#pragma omp parallel num_threads(nt)
        {
#pragma omp single
            actual = omp_get_num_threads();
            int tid = omp_get_thread_num();
            T local = init;
            // match schedule(static): contiguous blocks per thread
#pragma omp for schedule(static)
            for (int64_t i = 0; i < n; ++i) body(i, local);
            partials[tid] = local;
        }
        T total = init;
        for (int t = 0; t < actual; ++t) total += partials[t];
        return total;
    }
#endif
    T total = init;
    for (int64_t i = 0; i < n; ++i) body(i, total);
    return total;
}

}  // namespace nvf
