#pragma once

/**
 * @file stability.hpp
 * @brief Discrete ISS-Lyapunov function, its Gronwall envelope and the
 *        matrix conditions that certify its decay.
 *
 * For the upwind/Euler splitting scheme with diagonal weights P_j the
 * weighted energy
 *
 *     L^n = dx * sum_j W_j^T P_j W_j
 *
 * satisfies (L^{n+1} - L^n)/dt <= -eta L^n + beta (1/xi + dt) S^n whenever
 *
 *   - Theta_j is positive definite for every cell (interior transport),
 *   - M_j = P_j Pi_j + Pi_j^T P_j - dt Pi_j^T P_j Pi_j is PSD (source step),
 *   - B_c is PSD (boundary feedback),
 *
 * with S^n the running supremum of dx * sum_j |Psi_j^s|^2. The certified
 * rate is eta = min_j lambda_min(P_j^{-1/2} Theta_j P_j^{-1/2}).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "hyplyap/errors.hpp"
#include "hyplyap/grid.hpp"
#include "hyplyap/linalg.hpp"
#include "hyplyap/model.hpp"

namespace hyplyap {

struct LyapunovSeries {
    std::vector<double> t;
    std::vector<double> L;
    /// empty when no positive decay rate is available
    std::vector<double> L_up;
    /// running sup of dx * sum_j |Psi_j^s|^2 over s <= n
    std::vector<double> S;
    /// dx * sum_j |W_j^n|^2
    std::vector<double> state_norm2;
    double zeta = 0.0;
    double beta = 0.0;
    double eta = 0.0;
    double xi = 0.0;
    double dt = 0.0;

    double C() const { return beta / zeta; }
    bool has_envelope() const { return !L_up.empty(); }
};

/// PSD verdict tolerance: margin >= -1e-10 * max(1, scale).
inline double psd_tolerance(double scale) { return 1e-10 * std::max(1.0, scale); }

inline double lyapunov_value(const StateField& state, const RealizedWeights& weights, double dx) {
    if (state.k != weights.k || state.cells != weights.cells)
        throw InvalidParameter("lyapunov_value: state and weights disagree in shape");
    double s = 0.0;
    for (int j = 0; j < state.cells; ++j) {
        const auto p = weights.at(j);
        const auto w = state.cell(j);
        for (std::size_t i = 0; i < state.k; ++i) s += p[i] * w[i] * w[i];
    }
    return dx * s;
}

struct WeightBounds {
    double zeta = 0.0;  ///< smallest weight entry over interior cells
    double beta = 0.0;  ///< largest weight entry over interior cells
};

inline WeightBounds weight_bounds(const RealizedWeights& weights) {
    WeightBounds b{std::numeric_limits<double>::infinity(), 0.0};
    for (int j = 0; j < weights.cells; ++j)
        for (double v : weights.at(j)) {
            b.zeta = std::min(b.zeta, v);
            b.beta = std::max(b.beta, v);
        }
    return b;
}

/// Closed-form lower bound mu*alpha*(1 + xi dt) exp(-mu dx) - xi on the decay
/// rate of exponential weights with constant speeds (alpha = min |lambda|).
/// May be negative; callers decide what to do with that.
inline double decay_rate_exponential(double mu, double alpha, double xi, double dt, double dx) {
    return mu * alpha * (1.0 + xi * dt) * std::exp(-mu * dx) - xi;
}

/// Difference-quotient form alpha*(1 + xi dt)(1 - exp(-mu dx))/dx - xi, which is
/// what Theta_j evaluates to for constant speeds and exponential weights.
inline double decay_rate_exponential_difference(double mu, double alpha, double xi, double dt, double dx) {
    return alpha * (1.0 + xi * dt) * (-std::expm1(-mu * dx)) / dx - xi;
}

/// Envelope from the discrete Gronwall lemma:
///   L_up^0     = L0 + c S^0
///   L_up^{n+1} = exp(-eta t^{n+1}) L0 + c S^n,   c = (beta/eta)(1/xi + dt).
inline std::vector<double> gronwall_envelope(double L0, double eta, double beta, double xi, double dt,
                                             std::span<const double> S) {
    if (!(eta > 0.0)) throw NoCertificate("gronwall_envelope: decay rate eta must be positive");
    if (!(eta * dt < 1.0)) throw NoCertificate("gronwall_envelope: eta * dt must be below 1");
    const double c = beta / eta * (1.0 / xi + dt);
    std::vector<double> up(S.size());
    for (std::size_t n = 0; n < S.size(); ++n) {
        const double sup = n == 0 ? S[0] : S[n - 1];
        up[n] = std::exp(-eta * dt * static_cast<double>(n)) * L0 + c * sup;
    }
    return up;
}

struct ThetaCheck {
    /// min_j lambda_min(P_j^{-1/2} Theta_j P_j^{-1/2}); this is the certified eta
    double margin = 0.0;
    /// smallest raw diagonal entry of Theta over all cells
    double min_entry = 0.0;
    double scale = 0.0;
    std::vector<double> per_cell;
    bool positive_definite() const { return margin > 0.0; }
};

/// Theta_j is diagonal; the entry for component i is built from the
/// difference quotients of P and Lambda with upwind index placement
/// (j-1 feeds a positive component, j+1 a negative one).
inline ThetaCheck check_theta(const SystemCoefficients& c, const RealizedWeights& p, double xi, const GridSpec& grid) {
    if (p.k != c.k || p.cells != c.cells) throw InvalidParameter("check_theta: weights do not match coefficients");
    const double dx = grid.dx;
    const double a = 1.0 + xi * grid.dt;
    ThetaCheck out;
    out.margin = std::numeric_limits<double>::infinity();
    out.min_entry = std::numeric_limits<double>::infinity();
    out.per_cell.resize(static_cast<std::size_t>(c.cells));
    for (int j = 0; j < c.cells; ++j) {
        double cell_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < c.k; ++i) {
            double theta;
            if (i < c.m) {
                const double lam_prev = c.lambda_plus(j - 1, i);
                const double lam = c.lambda_plus(j, i);
                theta = -a * (lam_prev * (p(j + 1, i) - p(j, i)) / dx + (lam - lam_prev) / dx * p(j + 1, i)) -
                        xi * p(j, i);
            } else {
                const std::size_t r = i - c.m;
                const double lam_next = c.lambda_minus(j + 1, r);
                const double lam = c.lambda_minus(j, r);
                theta = a * (lam_next * (p(j, i) - p(j - 1, i)) / dx + (lam_next - lam) / dx * p(j - 1, i)) -
                        xi * p(j, i);
            }
            out.min_entry = std::min(out.min_entry, theta);
            out.scale = std::max(out.scale, std::abs(theta));
            cell_min = std::min(cell_min, theta / p(j, i));
        }
        out.per_cell[static_cast<std::size_t>(j)] = cell_min;
        out.margin = std::min(out.margin, cell_min);
    }
    return out;
}

/// M_j = P_j Pi_j + Pi_j^T P_j - dt Pi_j^T P_j Pi_j.
inline Matrix source_matrix(const Matrix& pi, std::span<const double> p, double dt) {
    const std::size_t k = p.size();
    Matrix pp = Matrix::diagonal(p);
    Matrix pt = pi.transpose();
    Matrix out = pp * pi + pt * pp - dt * (pt * pp * pi);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t cc = r + 1; cc < k; ++cc) {
            const double s = 0.5 * (out(r, cc) + out(cc, r));
            out(r, cc) = s;
            out(cc, r) = s;
        }
    return out;
}

struct SourceCheck {
    double margin = 0.0;  ///< min_j lambda_min(M_j)
    double scale = 0.0;   ///< max_j ||M_j||_inf
    std::vector<double> per_cell;
    bool psd() const { return margin >= -psd_tolerance(scale); }
};

inline SourceCheck check_source_matrix(const SystemCoefficients& c, const RealizedWeights& p, double dt) {
    if (p.k != c.k || p.cells != c.cells) throw InvalidParameter("check_source_matrix: weights do not match coefficients");
    SourceCheck out;
    out.margin = std::numeric_limits<double>::infinity();
    out.per_cell.resize(static_cast<std::size_t>(c.cells));
    for (int j = 0; j < c.cells; ++j) {
        const Matrix M = source_matrix(c.pi(j), p.at(j), dt);
        double sigma;
        if (c.k == 2) {
            // sigma^- = ((M11 + M22) - sqrt((M11 + M22)^2 - 4 (M11 M22 - M12^2))) / 2
            const double tr = M(0, 0) + M(1, 1);
            const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(0, 1);
            sigma = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
        } else {
            sigma = min_eig_symmetric(M);
        }
        out.per_cell[static_cast<std::size_t>(j)] = sigma;
        out.margin = std::min(out.margin, sigma);
        out.scale = std::max(out.scale, M.norm_inf());
    }
    return out;
}

/// B_c = diag{Lambda+_{J-1} P+_J, Lambda-_0 P-_{-1}}
///       - K^T diag{Lambda+_{-1} P+_0, Lambda-_J P-_{J-1}} K
inline Matrix boundary_matrix(const SystemCoefficients& c, const RealizedWeights& p, const FeedbackMatrix& K) {
    K.validate(c.k, c.m);
    const int J = c.cells;
    std::vector<double> outgoing(c.k), incoming(c.k);
    for (std::size_t i = 0; i < c.m; ++i) {
        outgoing[i] = c.lambda_plus(J - 1, i) * p(J, i);
        incoming[i] = c.lambda_plus(-1, i) * p(0, i);
    }
    for (std::size_t r = 0; r < c.k - c.m; ++r) {
        outgoing[c.m + r] = c.lambda_minus(0, r) * p(-1, c.m + r);
        incoming[c.m + r] = c.lambda_minus(J, r) * p(J - 1, c.m + r);
    }
    const Matrix Kf = K.full();
    return Matrix::diagonal(outgoing) - Kf.transpose() * Matrix::diagonal(incoming) * Kf;
}

struct BoundaryCheck {
    double margin = 0.0;
    double scale = 0.0;
    Matrix matrix;
    bool psd() const { return margin >= -psd_tolerance(scale); }
};

inline BoundaryCheck check_boundary_matrix(const SystemCoefficients& c, const RealizedWeights& p,
                                           const FeedbackMatrix& K) {
    BoundaryCheck out;
    out.matrix = boundary_matrix(c, p, K);
    out.margin = min_eig_symmetric(out.matrix);
    out.scale = out.matrix.norm_inf();
    return out;
}

struct FeedbackBounds {
    double k12_max = 0.0;
    double k21_max = 0.0;
};

/// Largest |k12|, |k21| for which the 2x2 B_c stays PSD.
inline FeedbackBounds feedback_bounds(const SystemCoefficients& c, const RealizedWeights& p) {
    if (c.k != 2 || c.m != 1) throw UnsupportedShape("feedback_bounds: only defined for k = 2, m = 1");
    const int J = c.cells;
    FeedbackBounds b;
    b.k12_max = std::sqrt(c.lambda_minus(0, 0) * p(-1, 1) / (c.lambda_plus(-1, 0) * p(0, 0)));
    b.k21_max = std::sqrt(c.lambda_plus(J - 1, 0) * p(J, 0) / (c.lambda_minus(J, 0) * p(J - 1, 1)));
    return b;
}

/// Aggregate of every discrete condition for one configuration.
struct ConditionReport {
    ThetaCheck theta;
    SourceCheck source;
    BoundaryCheck boundary;
    WeightBounds bounds;

    double eta_cert() const { return theta.margin; }
    bool theta_ok() const { return theta.positive_definite(); }
    bool source_ok() const { return source.psd(); }
    bool boundary_ok() const { return boundary.psd(); }
    bool all_ok() const { return theta_ok() && source_ok() && boundary_ok(); }
};

inline ConditionReport check_conditions(const SystemCoefficients& c, const RealizedWeights& p, const FeedbackMatrix& K,
                                        double xi, const GridSpec& grid) {
    ConditionReport r;
    r.theta = check_theta(c, p, xi, grid);
    r.source = check_source_matrix(c, p, grid.dt);
    r.boundary = check_boundary_matrix(c, p, K);
    r.bounds = weight_bounds(p);
    return r;
}

/// Continuous-in-x description used by the sampled checker.
struct ContinuousModel {
    double length = 1.0;
    std::size_t k = 0;
    std::size_t m = 0;
    std::function<std::vector<double>(double)> lambda_plus;
    std::function<std::vector<double>(double)> lambda_minus;
    std::function<Matrix(double)> pi;
};

/// Diagonal of P(x).
using WeightFunction = std::function<std::vector<double>(double)>;

inline WeightFunction exponential_weight_function(const ExponentialWeights& e) {
    return [e](double x) {
        std::vector<double> out;
        for (double p : e.p_plus) out.push_back(p * std::exp(-e.mu * x));
        for (double p : e.p_minus) out.push_back(p * std::exp(e.mu * x));
        return out;
    };
}

struct ContinuousReport {
    /// min over samples of lambda_min(Q(x))
    double interior_margin = 0.0;
    /// min over samples of lambda_min(P^{-1/2} Q P^{-1/2})
    double interior_rate = 0.0;
    double boundary_margin = 0.0;
    double boundary_scale = 0.0;
    bool interior_ok() const { return interior_margin > 0.0; }
    bool boundary_ok() const { return boundary_margin >= -psd_tolerance(boundary_scale); }
};

/// Samples Q(x) = -Lambda P' - Lambda' P + Pi^T P + P Pi - xi P on a uniform
/// grid of [0, l] (central differences with step l / (10 samples)) and the
/// boundary matrix
///   diag{Lambda+(l) P+(l), Lambda-(0) P-(0)} - K^T diag{Lambda+(0) P+(0), Lambda-(l) P-(l)} K.
inline ContinuousReport check_continuous(const ContinuousModel& model, const WeightFunction& weight,
                                         const FeedbackMatrix& K, double xi, int samples) {
    if (samples < 2) throw InvalidParameter("check_continuous: need at least 2 samples");
    const std::size_t k = model.k;
    const std::size_t m = model.m;
    const double l = model.length;
    const double h = l / (10.0 * samples);

    auto signed_speeds = [&](double x) {
        std::vector<double> s;
        for (double v : model.lambda_plus(x)) s.push_back(v);
        for (double v : model.lambda_minus(x)) s.push_back(-v);
        if (s.size() != k) throw InvalidParameter("check_continuous: speed vector size mismatch");
        return s;
    };

    ContinuousReport out;
    out.interior_margin = std::numeric_limits<double>::infinity();
    out.interior_rate = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        const double x = l * s / (samples - 1);
        const auto lam = signed_speeds(x);
        const auto lam_p = signed_speeds(x + h);
        const auto lam_m = signed_speeds(x - h);
        const auto P = weight(x);
        const auto P_p = weight(x + h);
        const auto P_m = weight(x - h);
        const Matrix pi = model.pi ? model.pi(x) : Matrix(k, k);
        const Matrix Pd = Matrix::diagonal(P);

        Matrix Q = pi.transpose() * Pd + Pd * pi - xi * Pd;
        for (std::size_t i = 0; i < k; ++i) {
            const double dP = (P_p[i] - P_m[i]) / (2.0 * h);
            const double dLam = (lam_p[i] - lam_m[i]) / (2.0 * h);
            Q(i, i) += -lam[i] * dP - dLam * P[i];
        }
        out.interior_margin = std::min(out.interior_margin, min_eig_symmetric(Q));
        Matrix scaled(k, k);
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) scaled(r, c) = Q(r, c) / std::sqrt(P[r] * P[c]);
        out.interior_rate = std::min(out.interior_rate, min_eig_symmetric(scaled));
    }

    K.validate(k, m);
    const auto P0 = weight(0.0);
    const auto Pl = weight(l);
    const auto lp0 = model.lambda_plus(0.0);
    const auto lpl = model.lambda_plus(l);
    const auto lm0 = model.lambda_minus(0.0);
    const auto lml = model.lambda_minus(l);
    std::vector<double> outgoing(k), incoming(k);
    for (std::size_t i = 0; i < m; ++i) {
        outgoing[i] = lpl[i] * Pl[i];
        incoming[i] = lp0[i] * P0[i];
    }
    for (std::size_t r = 0; r < k - m; ++r) {
        outgoing[m + r] = lm0[r] * P0[m + r];
        incoming[m + r] = lml[r] * Pl[m + r];
    }
    const Matrix Kf = K.full();
    const Matrix B = Matrix::diagonal(outgoing) - Kf.transpose() * Matrix::diagonal(incoming) * Kf;
    out.boundary_margin = min_eig_symmetric(B);
    out.boundary_scale = B.norm_inf();
    return out;
}

/// Checks dx sum|W^{n+1}|^2 <= C e^{-eta t^{n+1}} dx sum|W^0|^2 + (C/eta)(1/xi + dt) S^n
/// for every recorded step, with C = beta / zeta.
inline bool iss_bound_check(const LyapunovSeries& series, double w0_norm2, std::span<const double> norm2) {
    if (!(series.eta > 0.0)) throw NoCertificate("iss_bound_check: eta must be positive");
    const double C = series.C();
    const double offset = C / series.eta * (1.0 / series.xi + series.dt);
    for (std::size_t n = 0; n < norm2.size(); ++n) {
        double bound;
        if (n == 0) {
            bound = C * w0_norm2;
        } else {
            bound = C * std::exp(-series.eta * series.t[n]) * w0_norm2 + offset * series.S[n - 1];
        }
        if (norm2[n] > bound * (1.0 + 1e-12) + 1e-300) return false;
    }
    return true;
}

}  // namespace hyplyap
