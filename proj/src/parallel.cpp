#include "treeshape/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace treeshape::par {

namespace {

int env_thread_cap() {
    if (const char* s = std::getenv("TREESHAPE_THREADS")) {
        const int n = std::atoi(s);
        if (n > 0) return n;
    }
    return 0;
}

int g_max_threads = -1;  // -1 = uninitialized

}  // namespace

int max_threads() {
    if (g_max_threads < 0) g_max_threads = env_thread_cap();
    if (g_max_threads > 0) return g_max_threads;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_max_threads(int n) { g_max_threads = n > 0 ? n : 0; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int nt = max_threads();
#ifdef _OPENMP
    if (nt > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            fn(static_cast<std::size_t>(i));
        return;
    }
#endif
    (void)nt;
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

namespace {

double pairwise_sum_impl(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_impl(v, half) + pairwise_sum_impl(v + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
    return pairwise_sum_impl(v.data(), v.size());
}

}  // namespace treeshape::par
