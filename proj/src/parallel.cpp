#include "nvf/parallel.hpp"

namespace nvf {

namespace {
int g_threads = 0;
}

void set_num_threads(int n) {
    g_threads = n < 0 ? 0 : n;
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

int num_threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    (void)g_threads;
    return 1;
#endif
}

}  // namespace nvf
