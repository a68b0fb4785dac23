#include <doctest.h>

#include <random>
#include <vector>

#include "treeshape/parallel.hpp"

using namespace treeshape;

TEST_CASE("pairwise_sum: exact on small inputs, stable on large ones") {
    CHECK(par::pairwise_sum({}) == 0.0);
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(par::pairwise_sum(v) == 10.0);

    std::mt19937_64 rng(1);
    std::vector<double> big(100000);
    for (double& x : big)
        x = std::ldexp(static_cast<double>(rng() >> 11), -53) - 0.5;
    const double a = par::pairwise_sum(big);
    const double b = par::pairwise_sum(big);
    CHECK(a == b);

    // Against long double accumulation.
    long double acc = 0.0L;
    for (double x : big) acc += x;
    CHECK(a == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
}

TEST_CASE("parallel_for covers the index range once") {
    std::vector<int> hits(1000, 0);
    par::parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("set_max_threads caps the pool") {
    par::set_max_threads(2);
    CHECK(par::max_threads() == 2);
    par::set_max_threads(0);
    CHECK(par::max_threads() >= 1);
}
