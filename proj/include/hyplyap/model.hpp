#pragma once

/**
 * @file model.hpp
 * @brief Discrete description of a linear hyperbolic balance law
 *
 *     W_t + Lambda(x) W_x + Pi(x) W = Psi(x, t),  x in [0, l],
 *     Lambda = diag{Lambda+, -Lambda-},
 *
 * sampled on a GridSpec, together with the boundary feedback matrix,
 * the diagonal Lyapunov weights and the state container used by the solver.
 *
 * Speeds and weights are sampled on the extended index range -1..J (the two
 * ghost centers included); the source matrix only on the interior cells.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hyplyap/errors.hpp"
#include "hyplyap/grid.hpp"
#include "hyplyap/linalg.hpp"

namespace hyplyap {

/// Writes Psi(x_cell, t) into `out` (size k).
using Disturbance = std::function<void(int cell, double t, std::span<double> out)>;

struct SystemCoefficients {
    std::size_t k = 0;
    std::size_t m = 0;
    int cells = 0;
    /// (cells + 2) x m, row j + 1 holds Lambda+ at index j
    std::vector<double> lambda_plus_samples;
    /// (cells + 2) x (k - m), magnitudes of the negative speeds
    std::vector<double> lambda_minus_samples;
    /// one k x k source matrix per interior cell
    std::vector<Matrix> pi_samples;
    /// empty means Psi == 0
    Disturbance psi;

    std::size_t negative_count() const noexcept { return k - m; }

    double lambda_plus(int j, std::size_t i) const {
        return lambda_plus_samples[static_cast<std::size_t>(j + 1) * m + i];
    }
    double lambda_minus(int j, std::size_t i) const {
        return lambda_minus_samples[static_cast<std::size_t>(j + 1) * (k - m) + i];
    }
    /// Signed characteristic speed of component i at index j.
    double speed(int j, std::size_t i) const { return i < m ? lambda_plus(j, i) : -lambda_minus(j, i - m); }
    const Matrix& pi(int j) const { return pi_samples[static_cast<std::size_t>(j)]; }

    /// max |lambda| over all samples, ghosts included
    double max_speed() const {
        double best = 0.0;
        for (double v : lambda_plus_samples) best = std::max(best, v);
        for (double v : lambda_minus_samples) best = std::max(best, v);
        return best;
    }

    /// min |lambda| over interior cells
    double min_speed() const {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < cells; ++j)
            for (std::size_t i = 0; i < k; ++i) best = std::min(best, std::abs(speed(j, i)));
        return best;
    }

    void sample_disturbance(int cell, double t, std::span<double> out) const {
        if (psi) {
            psi(cell, t, out);
        } else {
            std::fill(out.begin(), out.end(), 0.0);
        }
    }

    /// Psi at every cell center, cells x k row-major.
    void sample_disturbance_field(double t, std::span<double> out) const {
        if (!psi) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        for (int j = 0; j < cells; ++j) psi(j, t, out.subspan(static_cast<std::size_t>(j) * k, k));
    }

    void validate() const {
        if (k == 0 || m > k) throw InvalidParameter("SystemCoefficients: need 0 <= m <= k, k > 0");
        if (cells < 2) throw InvalidParameter("SystemCoefficients: need at least 2 cells");
        const auto n = static_cast<std::size_t>(cells + 2);
        if (lambda_plus_samples.size() != n * m || lambda_minus_samples.size() != n * (k - m))
            throw InvalidParameter("SystemCoefficients: speed array length mismatch");
        if (pi_samples.size() != static_cast<std::size_t>(cells))
            throw InvalidParameter("SystemCoefficients: source array length mismatch");
        for (const auto& p : pi_samples)
            if (p.rows() != k || p.cols() != k) throw InvalidParameter("SystemCoefficients: source matrix must be k x k");
        for (double v : lambda_plus_samples)
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter("SystemCoefficients: Lambda+ entries must be > 0");
        for (double v : lambda_minus_samples)
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter("SystemCoefficients: Lambda- entries must be > 0");
    }
};

/// Samples speed and source functions of x on the grid (speeds on -1..J,
/// source on 0..J-1).
inline SystemCoefficients sample_coefficients(const GridSpec& grid, std::size_t k, std::size_t m,
                                              const std::function<std::vector<double>(double)>& lambda_plus,
                                              const std::function<std::vector<double>(double)>& lambda_minus,
                                              const std::function<Matrix(double)>& pi, Disturbance psi = {}) {
    SystemCoefficients c;
    c.k = k;
    c.m = m;
    c.cells = grid.cells;
    for (int j = -1; j <= grid.cells; ++j) {
        const double x = grid.center(j);
        const auto lp = lambda_plus(x);
        const auto lm = lambda_minus(x);
        if (lp.size() != m || lm.size() != k - m) throw InvalidParameter("sample_coefficients: speed vector size mismatch");
        c.lambda_plus_samples.insert(c.lambda_plus_samples.end(), lp.begin(), lp.end());
        c.lambda_minus_samples.insert(c.lambda_minus_samples.end(), lm.begin(), lm.end());
    }
    c.pi_samples.reserve(static_cast<std::size_t>(grid.cells));
    for (int j = 0; j < grid.cells; ++j) c.pi_samples.push_back(pi(grid.center(j)));
    c.psi = std::move(psi);
    c.validate();
    return c;
}

/// Constant-coefficient system.
inline SystemCoefficients constant_coefficients(const GridSpec& grid, std::vector<double> lambda_plus,
                                                std::vector<double> lambda_minus, Matrix pi, Disturbance psi = {}) {
    const std::size_t m = lambda_plus.size();
    const std::size_t k = m + lambda_minus.size();
    return sample_coefficients(
        grid, k, m, [&](double) { return lambda_plus; }, [&](double) { return lambda_minus; },
        [&](double) { return pi; }, std::move(psi));
}

/// Boundary feedback [W+(0); W-(l)] = K [W+(l); W-(0)] with K = [[0, K-], [K+, 0]].
struct FeedbackMatrix {
    Matrix k_minus;  ///< m x (k - m)
    Matrix k_plus;   ///< (k - m) x m

    std::size_t k() const noexcept { return k_minus.rows() + k_plus.rows(); }
    std::size_t m() const noexcept { return k_minus.rows(); }

    Matrix full() const {
        const std::size_t mm = m();
        const std::size_t kk = k();
        Matrix out(kk, kk);
        for (std::size_t r = 0; r < mm; ++r)
            for (std::size_t c = 0; c < kk - mm; ++c) out(r, mm + c) = k_minus(r, c);
        for (std::size_t r = 0; r < kk - mm; ++r)
            for (std::size_t c = 0; c < mm; ++c) out(mm + r, c) = k_plus(r, c);
        return out;
    }

    void validate(std::size_t k_expected, std::size_t m_expected) const {
        const std::size_t n = k_expected - m_expected;
        if (k_minus.rows() != m_expected || k_minus.cols() != n || k_plus.rows() != n || k_plus.cols() != m_expected)
            throw InvalidParameter("FeedbackMatrix: block dimensions do not match (k, m)");
    }

    /// 2x2 case: w1(0) = k12 w2(0), w2(l) = k21 w1(l).
    static FeedbackMatrix two_by_two(double k12, double k21) { return {Matrix{{k12}}, Matrix{{k21}}}; }

    static FeedbackMatrix zero(std::size_t k, std::size_t m) { return {Matrix(m, k - m), Matrix(k - m, m)}; }
};

/// Per-index diagonal weights p[j] for j = -1..J.
struct ExplicitWeights {
    std::vector<std::vector<double>> p;
};

/// P_j = diag{p_plus exp(-mu x_j), p_minus exp(mu x_j)}.
struct ExponentialWeights {
    std::vector<double> p_plus;
    std::vector<double> p_minus;
    double mu = 0.0;
};

using WeightSpec = std::variant<ExplicitWeights, ExponentialWeights>;

/// Diagonal weights realized on -1..J.
struct RealizedWeights {
    std::size_t k = 0;
    int cells = 0;
    std::vector<double> values;  ///< (cells + 2) x k

    double operator()(int j, std::size_t i) const { return values[static_cast<std::size_t>(j + 1) * k + i]; }
    std::span<const double> at(int j) const { return {values.data() + static_cast<std::size_t>(j + 1) * k, k}; }
};

inline RealizedWeights realize_weights(const WeightSpec& spec, const GridSpec& grid, std::size_t k, std::size_t m) {
    RealizedWeights out;
    out.k = k;
    out.cells = grid.cells;
    out.values.reserve(static_cast<std::size_t>(grid.cells + 2) * k);

    if (const auto* ex = std::get_if<ExplicitWeights>(&spec)) {
        if (ex->p.size() != static_cast<std::size_t>(grid.cells + 2))
            throw InvalidParameter("realize_weights: explicit weights need J + 2 rows (indices -1..J)");
        for (const auto& row : ex->p) {
            if (row.size() != k) throw InvalidParameter("realize_weights: explicit weight row must have k entries");
            out.values.insert(out.values.end(), row.begin(), row.end());
        }
    } else {
        const auto& e = std::get<ExponentialWeights>(spec);
        if (e.p_plus.size() != m || e.p_minus.size() != k - m)
            throw InvalidParameter("realize_weights: exponential weight sizes do not match (k, m)");
        if (!(e.mu >= 0.0) || !std::isfinite(e.mu)) throw InvalidParameter("realize_weights: mu must be >= 0");
        for (int j = -1; j <= grid.cells; ++j) {
            const double x = grid.center(j);
            for (double p : e.p_plus) out.values.push_back(p * std::exp(-e.mu * x));
            for (double p : e.p_minus) out.values.push_back(p * std::exp(e.mu * x));
        }
    }
    for (double v : out.values)
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidWeight("realize_weights: weight entries must be positive");
    return out;
}

/// Cell averages W_j (j = 0..J-1) plus the incoming ghost traces W+_{-1}, W-_J.
struct StateField {
    std::size_t k = 0;
    std::size_t m = 0;
    int cells = 0;
    std::vector<double> w;  ///< cells x k
    std::vector<double> ghost_left;   ///< m entries
    std::vector<double> ghost_right;  ///< k - m entries

    StateField() = default;
    StateField(int cells_, std::size_t k_, std::size_t m_)
        : k(k_), m(m_), cells(cells_), w(static_cast<std::size_t>(cells_) * k_, 0.0), ghost_left(m_, 0.0),
          ghost_right(k_ - m_, 0.0) {}

    double& operator()(int j, std::size_t i) { return w[static_cast<std::size_t>(j) * k + i]; }
    double operator()(int j, std::size_t i) const { return w[static_cast<std::size_t>(j) * k + i]; }
    std::span<double> cell(int j) { return {w.data() + static_cast<std::size_t>(j) * k, k}; }
    std::span<const double> cell(int j) const { return {w.data() + static_cast<std::size_t>(j) * k, k}; }

    /// dx * sum_j |W_j|^2
    double norm2(double dx) const {
        double s = 0.0;
        for (double v : w) s += v * v;
        return dx * s;
    }

    bool finite() const {
        for (double v : w)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Built-in 2x2 test case: lambda = +-1, Pi = 0, f = -0.5, g = 0.5,
/// Psi = (amp sin^2(pi t), -amp sin^2(pi t)) for t < stop_time, zero after.
struct LinearExample {
    GridSpec grid;
    SystemCoefficients coeffs;
    FeedbackMatrix feedback;
    StateField initial;
};

inline LinearExample linear_example(int cells, double cfl, double final_time, double k12, double k21, double amp,
                                    double stop_time = 5.0, double length = 1.0) {
    if (!(amp >= 0.0)) throw InvalidParameter("linear_example: amplitude must be >= 0");
    LinearExample ex;
    ex.grid = build_grid(length, cells, final_time, cfl, 1.0);
    Disturbance psi;
    if (amp > 0.0) {
        psi = [amp, stop_time](int, double t, std::span<double> out) {
            const double s = std::sin(std::numbers::pi * t);
            const double v = t < stop_time ? amp * s * s : 0.0;
            out[0] = v;
            out[1] = -v;
        };
    }
    ex.coeffs = constant_coefficients(ex.grid, {1.0}, {1.0}, Matrix(2, 2), std::move(psi));
    ex.feedback = FeedbackMatrix::two_by_two(k12, k21);
    ex.initial = StateField(cells, 2, 1);
    for (int j = 0; j < cells; ++j) {
        ex.initial(j, 0) = -0.5;
        ex.initial(j, 1) = 0.5;
    }
    return ex;
}

}  // namespace hyplyap
