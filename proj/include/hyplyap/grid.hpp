#pragma once

#include <cmath>

#include "hyplyap/errors.hpp"

namespace hyplyap {

/// Uniform space-time grid on [0, length] x [0, final_time].
///
/// Cell j covers [j dx, (j+1) dx]; centers are (j + 1/2) dx. Indices -1 and
/// `cells` denote the ghost cells just outside each boundary.
struct GridSpec {
    double length = 1.0;
    int cells = 2;
    double final_time = 1.0;
    double cfl = 1.0;
    double lambda_max = 1.0;
    double dx = 0.5;
    double dt = 0.5;
    long steps = 2;

    double center(int j) const noexcept { return (j + 0.5) * dx; }
    double time(long n) const noexcept { return static_cast<double>(n) * dt; }
    /// dt * lambda_max / dx
    double courant() const noexcept { return dt * lambda_max / dx; }
};

/// Grid with the CFL-constrained step dt = cfl * dx / lambda_max and
/// steps = ceil(final_time / dt). The last step may overshoot final_time.
inline GridSpec build_grid(double length, int cells, double final_time, double cfl, double lambda_max) {
    if (!(length > 0.0)) throw InvalidParameter("build_grid: length must be positive");
    if (cells < 2) throw InvalidParameter("build_grid: need at least 2 cells");
    if (!(final_time > 0.0)) throw InvalidParameter("build_grid: final time must be positive");
    if (!(cfl > 0.0) || cfl > 1.0) throw InvalidParameter("build_grid: cfl must lie in (0, 1]");
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max))
        throw InvalidParameter("build_grid: lambda_max must be positive");

    GridSpec g;
    g.length = length;
    g.cells = cells;
    g.final_time = final_time;
    g.cfl = cfl;
    g.lambda_max = lambda_max;
    g.dx = length / cells;
    g.dt = cfl * g.dx / lambda_max;
    // guard against T/dt landing a few ulps above an integer
    g.steps = static_cast<long>(std::ceil(final_time / g.dt - 1e-9));
    if (g.steps < 1) g.steps = 1;
    return g;
}

}  // namespace hyplyap
