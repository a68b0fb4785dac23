// Benchmark comparing the OpenMP kernels against serial execution: plane
// projection, obstacle sweeps, and the exhaustive topology scan.

#include <chrono>
#include <cstdio>
#include <random>

#include "treeshape/irrigation.hpp"
#include "treeshape/parallel.hpp"
#include "treeshape/sunlight.hpp"
#include "treeshape/testing.hpp"

using namespace treeshape;

namespace {

template <typename Fn>
double time_ms(Fn&& fn, int repeats) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.2f ms %10.2f ms   x%.2f\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    int res = 256;
    int repeats = 3;
    if (argc > 1) res = std::atoi(argv[1]);
    if (argc > 2) repeats = std::atoi(argv[2]);

    std::mt19937_64 rng(7);
    const GridDensity f = testing::random_blocks_field(rng, res, 6);
    const GridDensity g = testing::random_blocks_field(rng, res, 6);
    const Direction n = Direction::from_angle(2.1);

    std::printf("grid %dx%d, %d worker thread(s)\n", res, res,
                par::max_threads());
    std::printf("%-28s %13s %13s %7s\n", "kernel", "serial", "parallel",
                "speedup");

    double sink = 0.0;
    // Warm up the thread pool so the first timed kernel is not charged for it.
    sink += sunlight_directional(f, n);
    report("project_density",
           time_ms([&] { sink += reference::project_density(f, n, f.spec.min_cell_width()).values[0]; },
                   repeats),
           time_ms([&] { sink += project_density(f, n, f.spec.min_cell_width()).values[0]; },
                   repeats));
    report("sunlight_directional",
           time_ms([&] { sink += reference::sunlight_directional(f, n); }, repeats),
           time_ms([&] { sink += sunlight_directional(f, n); }, repeats));
    report("sunlight_with_obstacle",
           time_ms([&] { sink += reference::sunlight_with_obstacle(f, g, n); },
                   repeats),
           time_ms([&] { sink += sunlight_with_obstacle(f, g, n); }, repeats));

    // Exhaustive topology scan over all 10395 candidate trees of 7 atoms.
    const DiscreteMeasure mu = testing::random_measure(rng, 2, 7, 7, 1.0);
    const double serial_scan = time_ms(
        [&] {
            par::set_max_threads(1);
            sink += irrigation_cost(mu, 0.6).cost;
            par::set_max_threads(0);
        },
        1);
    const double parallel_scan =
        time_ms([&] { sink += irrigation_cost(mu, 0.6).cost; }, 1);
    report("irrigation_topology_scan", serial_scan, parallel_scan);

    std::printf("(checksum %g)\n", sink);
    return 0;
}
