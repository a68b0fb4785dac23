#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace treeshape::par {

// Worker cap. Defaults to the TREESHAPE_THREADS environment variable when set,
// otherwise the OpenMP default. set_max_threads(0) restores the default.
int max_threads();
void set_max_threads(int n);

// Runs fn(i) for i in [0, n). Iterations must be independent; each writes its
// own output slot, so results do not depend on the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Deterministic sum: fixed pairwise reduction tree, independent of thread
// count. Use for all quadrature/inner-product accumulations that feed results.
double pairwise_sum(std::span<const double> v);

}  // namespace treeshape::par
