#pragma once

/**
 * @file saint_venant.hpp
 * @brief Saint-Venant channel with rainfall, linearized around a subcritical
 *        steady state and written in Riemann coordinates.
 *
 *     h_t + (h u)_x = R
 *     u_t + (u^2/2 + g h)_x + F(h, u) = -(u/h) R
 *
 * The friction/slope term F defaults to C_f u^2/h - g S_b. Setting
 * friction_with_g switches to g (C_f u^2/h - S_b).
 */

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hyplyap/errors.hpp"
#include "hyplyap/grid.hpp"
#include "hyplyap/linalg.hpp"
#include "hyplyap/model.hpp"
#include "hyplyap/stability.hpp"

namespace hyplyap::sv {

struct SaintVenantParams {
    double g = 9.81;
    double cf = 0.1;
    double sb = 0.0459;
    bool friction_with_g = false;
    /// steady rainfall R*(x); empty means zero
    std::function<double(double)> rain_star;

    double steady_rain(double x) const { return rain_star ? rain_star(x) : 0.0; }
    /// coefficient multiplying u^2/h in F
    double friction_factor() const { return friction_with_g ? g * cf : cf; }
    double friction_term(double h, double u) const {
        return friction_with_g ? g * (cf * u * u / h - sb) : cf * u * u / h - g * sb;
    }
};

/// Slope that makes (h, u) = const a steady state with R* = 0.
inline double balanced_slope(const SaintVenantParams& p, double h, double u) {
    return p.friction_with_g ? p.cf * u * u / h : p.cf * u * u / (p.g * h);
}

struct SteadyDerivative {
    double dh = 0.0;
    double du = 0.0;
};

/// h*' and u*' from the steady balance (h u)' = R*, (u^2/2 + g h)' + F = -(u/h) R*.
inline SteadyDerivative steady_rhs(const SaintVenantParams& p, double h, double u, double rain) {
    const double F = p.friction_term(h, u);
    const double den = u * u - p.g * h;
    return {(h * F + 2.0 * u * rain) / den, -(u * F + (p.g + u * u / h) * rain) / den};
}

/// (u u' + g h') + F + (u/h) R*, the momentum residual of a steady profile.
inline double momentum_residual(const SaintVenantParams& p, double h, double u, double dh, double du, double rain) {
    return u * du + p.g * dh + p.friction_term(h, u) + u / h * rain;
}

/// Steady profile sampled at cell and ghost centers, index j + 1 for j = -1..J.
struct SteadyProfile {
    std::vector<double> h;
    std::vector<double> u;

    double depth(int j) const { return h[static_cast<std::size_t>(j + 1)]; }
    double velocity(int j) const { return u[static_cast<std::size_t>(j + 1)]; }
};

namespace detail {

inline void require_subcritical(const SaintVenantParams& p, double x, double h, double u) {
    if (!(h > 0.0) || !std::isfinite(h)) throw SteadyStateFailure(x, "depth is not positive");
    if (!(p.g * h - u * u > 0.0)) throw SteadyStateFailure(x, "flow is not subcritical (g h - u^2 <= 0)");
}

/// One classical fourth-order step of size `step` from x.
inline std::array<double, 2> rk4_step(const SaintVenantParams& p, double x, std::array<double, 2> y, double step) {
    auto f = [&](double xs, std::array<double, 2> s) {
        require_subcritical(p, xs, s[0], s[1]);
        const auto d = steady_rhs(p, s[0], s[1], p.steady_rain(xs));
        return std::array<double, 2>{d.dh, d.du};
    };
    const auto k1 = f(x, y);
    const auto k2 = f(x + 0.5 * step, {y[0] + 0.5 * step * k1[0], y[1] + 0.5 * step * k1[1]});
    const auto k3 = f(x + 0.5 * step, {y[0] + 0.5 * step * k2[0], y[1] + 0.5 * step * k2[1]});
    const auto k4 = f(x + step, {y[0] + step * k3[0], y[1] + step * k3[1]});
    std::array<double, 2> out{y[0] + step / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                              y[1] + step / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
    require_subcritical(p, x + step, out[0], out[1]);
    return out;
}

}  // namespace detail

/// Integrates the steady ODE pair from (h0, u0) at x = 0 with RK4 using
/// `substeps` steps per cell, sampling at cell centers and both ghost centers.
inline SteadyProfile steady_state_solve(const SaintVenantParams& p, double h0, double u0, double length, int cells,
                                        int substeps = 4) {
    if (cells < 2 || !(length > 0.0) || substeps < 2 || substeps % 2 != 0)
        throw InvalidParameter("steady_state_solve: need cells >= 2, length > 0 and an even substep count");
    detail::require_subcritical(p, 0.0, h0, u0);
    const double dx = length / cells;
    const double step = dx / substeps;
    const int half = substeps / 2;

    SteadyProfile prof;
    prof.h.resize(static_cast<std::size_t>(cells + 2));
    prof.u.resize(static_cast<std::size_t>(cells + 2));

    std::array<double, 2> y{h0, u0};
    double x = 0.0;
    for (int s = 0; s < half; ++s, x -= step) y = detail::rk4_step(p, x, y, -step);
    prof.h[0] = y[0];
    prof.u[0] = y[1];

    y = {h0, u0};
    x = 0.0;
    for (int s = 0; s < half; ++s, x += step) y = detail::rk4_step(p, x, y, step);
    for (int j = 0; j <= cells; ++j) {
        prof.h[static_cast<std::size_t>(j + 1)] = y[0];
        prof.u[static_cast<std::size_t>(j + 1)] = y[1];
        if (j == cells) break;
        for (int s = 0; s < substeps; ++s) {
            y = detail::rk4_step(p, x, y, step);
            x = (j + 0.5) * dx + (s + 1) * step;
        }
    }
    return prof;
}

struct Riemann {
    double w1 = 0.0;
    double w2 = 0.0;
};

struct Perturbation {
    double v1 = 0.0;  ///< depth perturbation h - h*
    double v2 = 0.0;  ///< velocity perturbation u - u*
};

inline Riemann riemann_forward(double v1, double v2, double h_star, double g) {
    if (!(h_star > 0.0)) throw InvalidParameter("riemann_forward: h* must be positive");
    const double s = std::sqrt(g / h_star);
    return {v2 + v1 * s, v2 - v1 * s};
}

inline Perturbation riemann_backward(double w1, double w2, double h_star, double g) {
    if (!(h_star > 0.0)) throw InvalidParameter("riemann_backward: h* must be positive");
    return {0.5 * std::sqrt(h_star / g) * (w1 - w2), 0.5 * (w1 + w2)};
}

/// Coupling matrix Gamma in Riemann coordinates at one point of the steady profile.
inline Matrix gamma_matrix(const SaintVenantParams& p, double h, double u, double rain_star) {
    const double c = std::sqrt(p.g * h);
    const double l1 = u + c;
    const double l2 = u - c;
    const auto d = steady_rhs(p, h, u, rain_star);
    const double fr = p.friction_factor();
    // fr u^2/(2h) * (2/u -+ 1/c), expanded so u = 0 is harmless
    const double fric_minus = fr * u / h - fr * u * u / (2.0 * h * c);
    const double fric_plus = fr * u / h + fr * u * u / (2.0 * h * c);
    const double rain = rain_star / (2.0 * h * c);
    Matrix G(2, 2);
    G(0, 0) = d.du + (l1 + 2.0 * c) * d.dh / (4.0 * h) + fric_minus - l2 * rain;
    G(0, 1) = -(l1 - 2.0 * c) * d.dh / (4.0 * h) + fric_plus + l1 * rain;
    G(1, 0) = -(l2 + 2.0 * c) * d.dh / (4.0 * h) + fric_minus - l2 * rain;
    G(1, 1) = d.du + (l2 - 2.0 * c) * d.dh / (4.0 * h) + fric_plus + l1 * rain;
    return G;
}

/// R(x, t)
using Rainfall = std::function<double(double x, double t)>;

/// Linearized system in Riemann coordinates: lambda1 = u* + sqrt(g h*),
/// lambda2 = u* - sqrt(g h*), Pi = Gamma, Psi = (-(lambda2/h*) delta, -(lambda1/h*) delta)
/// with delta = R - R*.
inline SystemCoefficients linearize(const SteadyProfile& prof, const SaintVenantParams& p, const GridSpec& grid,
                                    Rainfall rain = {}) {
    const int J = grid.cells;
    if (prof.h.size() != static_cast<std::size_t>(J + 2)) throw InvalidParameter("linearize: profile does not match grid");
    SystemCoefficients c;
    c.k = 2;
    c.m = 1;
    c.cells = J;
    for (int j = -1; j <= J; ++j) {
        const double h = prof.depth(j);
        const double u = prof.velocity(j);
        const double cel = std::sqrt(p.g * h);
        c.lambda_plus_samples.push_back(u + cel);
        c.lambda_minus_samples.push_back(cel - u);
    }
    std::vector<double> psi1(static_cast<std::size_t>(J)), psi2(static_cast<std::size_t>(J)), rstar(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
        const double x = grid.center(j);
        const double h = prof.depth(j);
        const double u = prof.velocity(j);
        const double rs = p.steady_rain(x);
        c.pi_samples.push_back(gamma_matrix(p, h, u, rs));
        const double cel = std::sqrt(p.g * h);
        psi1[static_cast<std::size_t>(j)] = -(u - cel) / h;
        psi2[static_cast<std::size_t>(j)] = -(u + cel) / h;
        rstar[static_cast<std::size_t>(j)] = rs;
    }
    if (rain) {
        const double dx = grid.dx;
        c.psi = [psi1 = std::move(psi1), psi2 = std::move(psi2), rstar = std::move(rstar), rain = std::move(rain),
                 dx](int j, double t, std::span<double> out) {
            const auto idx = static_cast<std::size_t>(j);
            const double delta = rain((j + 0.5) * dx, t) - rstar[idx];
            out[0] = psi1[idx] * delta;
            out[1] = psi2[idx] * delta;
        };
    }
    c.validate();
    return c;
}

struct FeedbackGains {
    double k12 = 0.0;
    double k21 = 0.0;
};

/// Maps u(0) = kappa0 h(0), u(l) = kappal h(l) to w1(0) = k12 w2(0), w2(l) = k21 w1(l).
inline FeedbackGains physical_feedback_to_k(double kappa0, double kappal, double h_star_0, double h_star_l, double g) {
    auto map = [g](double kappa, double h) {
        const double a = kappa * std::sqrt(h / g);
        if (std::abs(a - 1.0) < 1e-12) throw SingularGain("physical_feedback_to_k: kappa * sqrt(h*/g) = 1");
        return (a + 1.0) / (a - 1.0);
    };
    return {map(kappa0, h_star_0), map(kappal, h_star_l)};
}

struct SaintVenantSettings {
    int cells = 1600;
    double cfl = 0.75;
    double final_time = 10.0;
    double length = 1.0;
    double mu = 0.575;
    double xi = 0.125;
    double k12 = 0.75;
    double k21 = 0.75;
    std::optional<double> kappa0;
    std::optional<double> kappal;
    SaintVenantParams params;
    double h0 = 2.0;  ///< steady depth at x = 0
    double u0 = 3.0;  ///< steady velocity at x = 0
    double h_init = 2.5;
    double v_amp = 4.0;  ///< initial velocity v_amp sin(pi x)
    double rain_amp = 0.25;
    double stop_time = 5.0;
    std::optional<double> p1;
    std::optional<double> p2;
};

struct SaintVenantExperiment {
    GridSpec grid;
    SteadyProfile profile;
    SystemCoefficients coeffs;
    FeedbackMatrix feedback;
    StateField initial;
    ExponentialWeights weights;
    FeedbackBounds bounds;
    std::vector<std::string> warnings;
};

/// Everything the solver needs for the rainfall experiment. Gains outside
/// the boundary-condition bounds produce warnings, not errors.
inline SaintVenantExperiment sv_experiment(const SaintVenantSettings& s) {
    SaintVenantExperiment ex;
    const auto& p = s.params;
    ex.profile = steady_state_solve(p, s.h0, s.u0, s.length, s.cells);

    double lmax = 0.0;
    for (std::size_t i = 0; i < ex.profile.h.size(); ++i) {
        const double c = std::sqrt(p.g * ex.profile.h[i]);
        lmax = std::max({lmax, std::abs(ex.profile.u[i] + c), std::abs(ex.profile.u[i] - c)});
    }
    ex.grid = build_grid(s.length, s.cells, s.final_time, s.cfl, lmax);

    Rainfall rain;
    if (s.rain_amp != 0.0) {
        rain = [amp = s.rain_amp, stop = s.stop_time](double, double t) {
            const double v = std::sin(std::numbers::pi * t);
            return t < stop ? amp * v * v : 0.0;
        };
    }
    ex.coeffs = linearize(ex.profile, p, ex.grid, std::move(rain));

    double k12 = s.k12;
    double k21 = s.k21;
    if (s.kappa0 || s.kappal) {
        if (!(s.kappa0 && s.kappal)) throw InvalidParameter("sv_experiment: kappa0 and kappal must be given together");
        const auto gains = physical_feedback_to_k(*s.kappa0, *s.kappal, ex.profile.depth(0),
                                                  ex.profile.depth(s.cells - 1), p.g);
        k12 = gains.k12;
        k21 = gains.k21;
    }
    ex.feedback = FeedbackMatrix::two_by_two(k12, k21);

    const Matrix& g0 = ex.coeffs.pi(0);
    ex.weights = ExponentialWeights{{s.p1.value_or(g0(1, 0))}, {s.p2.value_or(g0(0, 1))}, s.mu};

    ex.initial = StateField(s.cells, 2, 1);
    for (int j = 0; j < s.cells; ++j) {
        const double x = ex.grid.center(j);
        const double v1 = s.h_init - ex.profile.depth(j);
        const double v2 = s.v_amp * std::sin(std::numbers::pi * x) - ex.profile.velocity(j);
        const auto w = riemann_forward(v1, v2, ex.profile.depth(j), p.g);
        ex.initial(j, 0) = w.w1;
        ex.initial(j, 1) = w.w2;
    }

    const auto realized = realize_weights(ex.weights, ex.grid, 2, 1);
    ex.bounds = feedback_bounds(ex.coeffs, realized);
    if (std::abs(k12) > ex.bounds.k12_max)
        ex.warnings.push_back("|k12| = " + std::to_string(std::abs(k12)) + " exceeds bound " +
                              std::to_string(ex.bounds.k12_max));
    if (std::abs(k21) > ex.bounds.k21_max)
        ex.warnings.push_back("|k21| = " + std::to_string(std::abs(k21)) + " exceeds bound " +
                              std::to_string(ex.bounds.k21_max));
    return ex;
}

}  // namespace hyplyap::sv
