#pragma once

/**
 * @file solver.hpp
 * @brief First-order upwind finite-volume scheme with operator splitting.
 *
 * One step n -> n+1:
 *   1. ghost cells W+_{-1}, W-_J from the boundary feedback,
 *   2. transport + disturbance (explicit Euler, upwind differences),
 *   3. source term W^{n+1} = W~ - dt Pi W~.
 */

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hyplyap/errors.hpp"
#include "hyplyap/grid.hpp"
#include "hyplyap/model.hpp"
#include "hyplyap/stability.hpp"

namespace hyplyap {

/// When the ghost traces for step n+1 are taken.
enum class BoundaryTiming {
    pre,   ///< from W^n right before transport (also realizes compatibility at n = 0)
    post,  ///< from the intermediate W~^n, before the source step
};

inline constexpr double kBlowupThreshold = 1e12;

/// [W+_{-1}; W-_J] = K [W+_{J-1}; W-_0]; interior untouched.
inline void apply_boundary(StateField& state, const FeedbackMatrix& K) {
    if (state.cells < 2) throw InvalidParameter("apply_boundary: need at least 2 cells");
    K.validate(state.k, state.m);
    const std::size_t m = state.m;
    const std::size_t n = state.k - m;
    const int last = state.cells - 1;
    for (std::size_t r = 0; r < m; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += K.k_minus(r, c) * state(0, m + c);
        state.ghost_left[r] = s;
    }
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += K.k_plus(r, c) * state(last, c);
        state.ghost_right[r] = s;
    }
}

namespace detail {

/// Throws NumericalBlowup naming the first offending cell.
inline void check_state(long step, const StateField& state) {
    bool bad = false;
    for (double v : state.w) bad |= !(std::abs(v) <= kBlowupThreshold);
    if (!bad) return;
    for (std::size_t q = 0; q < state.w.size(); ++q) {
        const double v = state.w[q];
        if (!(std::abs(v) <= kBlowupThreshold))
            throw NumericalBlowup(step, "cell " + std::to_string(q / state.k) + " value " + std::to_string(v));
    }
}

}  // namespace detail

/// Upwind transport plus disturbance; writes W~ into `out` (ghosts copied).
/// `forcing` holds Psi at t^n for every cell, cells x k row-major.
inline void transport_step(const StateField& state, StateField& out, const SystemCoefficients& c, const GridSpec& grid,
                           long n, std::span<const double> forcing) {
    const double nu = grid.dt / grid.dx;
    const int J = state.cells;
    const std::size_t m = c.m;
    const std::size_t k = c.k;
    for (int j = 0; j < J; ++j) {
        const double* psi = forcing.data() + static_cast<std::size_t>(j) * k;
        for (std::size_t i = 0; i < m; ++i) {
            const double left = j == 0 ? state.ghost_left[i] : state(j - 1, i);
            const double w = state(j, i);
            out(j, i) = w - nu * c.lambda_plus(j - 1, i) * (w - left) + grid.dt * psi[i];
        }
        for (std::size_t i = m; i < k; ++i) {
            const double right = j == J - 1 ? state.ghost_right[i - m] : state(j + 1, i);
            const double w = state(j, i);
            out(j, i) = w + nu * c.lambda_minus(j + 1, i - m) * (right - w) + grid.dt * psi[i];
        }
    }
    detail::check_state(n, out);
    out.ghost_left = state.ghost_left;
    out.ghost_right = state.ghost_right;
}

inline StateField transport_step(const StateField& state, const SystemCoefficients& c, const GridSpec& grid, long n) {
    StateField out = state;
    std::vector<double> forcing(static_cast<std::size_t>(c.cells) * c.k);
    c.sample_disturbance_field(grid.time(n), forcing);
    transport_step(state, out, c, grid, n, forcing);
    return out;
}

/// W^{n+1}_j = W~_j - dt Pi_j W~_j, in place. `scratch` must hold k doubles.
inline void source_step(StateField& state, const SystemCoefficients& c, const GridSpec& grid, long n,
                        std::span<double> scratch) {
    const std::size_t k = c.k;
    for (int j = 0; j < state.cells; ++j) {
        const Matrix& pi = c.pi(j);
        auto w = state.cell(j);
        for (std::size_t r = 0; r < k; ++r) {
            double s = 0.0;
            for (std::size_t q = 0; q < k; ++q) s += pi(r, q) * w[q];
            scratch[r] = w[r] - grid.dt * s;
        }
        std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), w.begin());
    }
    detail::check_state(n, state);
}

inline StateField source_step(StateField state, const SystemCoefficients& c, const GridSpec& grid) {
    std::vector<double> scratch(c.k);
    source_step(state, c, grid, 0, scratch);
    return state;
}

struct SimulationOptions {
    BoundaryTiming timing = BoundaryTiming::pre;
    bool keep_trajectory = false;
    /// Envelope rate; defaults to the certified eta from check_theta.
    std::optional<double> eta;
};

struct SimulationResult {
    StateField final_state;
    LyapunovSeries series;
    /// W^0..W^N when keep_trajectory is set
    std::vector<StateField> trajectory;
};

/// Runs the scheme for grid.steps steps and records L^n, S^n and the
/// Gronwall envelope (when the decay rate is positive and eta dt < 1).
inline SimulationResult simulate(const SystemCoefficients& c, const GridSpec& grid, const FeedbackMatrix& K,
                                 const StateField& initial, const RealizedWeights& weights, double xi,
                                 const SimulationOptions& options = {}) {
    if (!(xi > 0.0)) throw InvalidParameter("simulate: xi must be positive");
    c.validate();
    K.validate(c.k, c.m);
    if (initial.k != c.k || initial.m != c.m || initial.cells != c.cells || grid.cells != c.cells)
        throw InvalidParameter("simulate: initial state does not match coefficients");
    if (weights.k != c.k || weights.cells != c.cells) throw InvalidParameter("simulate: weights do not match coefficients");
    if (grid.dt * c.max_speed() / grid.dx > 1.0 + 1e-12)
        throw InvalidParameter("simulate: CFL condition violated for the sampled speeds");

    const long N = grid.steps;
    const double dx = grid.dx;
    const auto bounds = weight_bounds(weights);

    SimulationResult res;
    auto& s = res.series;
    s.zeta = bounds.zeta;
    s.beta = bounds.beta;
    s.xi = xi;
    s.dt = grid.dt;
    s.eta = options.eta ? *options.eta : check_theta(c, weights, xi, grid).margin;
    const auto count = static_cast<std::size_t>(N + 1);
    s.t.reserve(count);
    s.L.reserve(count);
    s.S.reserve(count);
    s.state_norm2.reserve(count);

    StateField state = initial;
    StateField work = initial;
    std::vector<double> scratch(c.k);
    std::vector<double> forcing(static_cast<std::size_t>(c.cells) * c.k);
    apply_boundary(state, K);

    double sup = 0.0;
    // samples Psi at t^n into `forcing`, then records step n
    auto record = [&](long n) {
        c.sample_disturbance_field(grid.time(n), forcing);
        double acc = 0.0;
        for (double v : forcing) acc += v * v;
        sup = std::max(sup, dx * acc);
        s.t.push_back(grid.time(n));
        s.L.push_back(lyapunov_value(state, weights, dx));
        s.state_norm2.push_back(state.norm2(dx));
        s.S.push_back(sup);
        if (options.keep_trajectory) res.trajectory.push_back(state);
    };

    record(0);
    for (long n = 0; n < N; ++n) {
        if (options.timing == BoundaryTiming::pre) apply_boundary(state, K);
        transport_step(state, work, c, grid, n, forcing);
        if (options.timing == BoundaryTiming::post) apply_boundary(work, K);
        source_step(work, c, grid, n, scratch);
        std::swap(state, work);
        record(n + 1);
    }

    if (s.eta > 0.0 && s.eta * grid.dt < 1.0) s.L_up = gronwall_envelope(s.L.front(), s.eta, s.beta, xi, grid.dt, s.S);
    res.final_state = std::move(state);
    return res;
}

}  // namespace hyplyap
