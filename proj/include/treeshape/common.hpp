#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeshape {

// A point in R^d, d = size(). d is carried by the owning object; free points
// carry it implicitly.
using Point = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

// Thrown when an iterative solver exhausts its budget without reaching the
// requested tolerance. Carries the last residual so callers can report it.
class SolverError : public std::runtime_error {
  public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

  private:
    double residual_;
};

// Surface area of the unit sphere S^{d-1} in R^d.
inline double sphere_surface(int d) {
    switch (d) {
        case 1: return 2.0;
        case 2: return 2.0 * M_PI;
        case 3: return 4.0 * M_PI;
        default: {
            // sigma_d = 2 pi^{d/2} / Gamma(d/2)
            return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
        }
    }
}

// Volume of the unit ball in R^d (omega_d). omega_0 = 1 by convention.
inline double ball_volume(int d) {
    if (d == 0) return 1.0;
    return sphere_surface(d) / d;
}

}  // namespace treeshape
