#include <gtest/gtest.h>

#include <cmath>

#include "hyplyap/solver.hpp"
#include "hyplyap/stability.hpp"
#include "test_support.hpp"

using namespace hyplyap;
using testing_support::Gen;

namespace {

constexpr double kMu = 0.575;
constexpr double kXi = 0.125;

RealizedWeights exp_weights(const GridSpec& g, double p1 = 1.0, double p2 = 1.0, double mu = kMu) {
    return realize_weights(ExponentialWeights{{p1}, {p2}, mu}, g, 2, 1);
}

/// root of f on [a, b] by bisection
template <class F>
double bisect(F f, double a, double b) {
    double fa = f(a);
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

TEST(LyapunovValue, ZeroState) {
    const auto ex = linear_example(50, 0.75, 1.0, 0.5, 0.5, 0.0);
    EXPECT_EQ(lyapunov_value(StateField(50, 2, 1), exp_weights(ex.grid), ex.grid.dx), 0.0);
}

TEST(LyapunovValue, SingleCell) {
    StateField s(1, 2, 1);
    s(0, 0) = 1.0;
    s(0, 1) = 1.0;
    RealizedWeights p{2, 1, std::vector<double>(6, 1.0)};
    EXPECT_DOUBLE_EQ(lyapunov_value(s, p, 0.5), 1.0);
}

TEST(LyapunovValue, LinearInitialDataMatchesIntegral) {
    const auto ex = linear_example(1600, 0.75, 10.0, 0.5, 0.5, 0.01);
    const double L0 = lyapunov_value(ex.initial, exp_weights(ex.grid), ex.grid.dx);
    const double exact = 0.25 * ((1.0 - std::exp(-kMu)) / kMu + (std::exp(kMu) - 1.0) / kMu);
    EXPECT_NEAR(exact, 0.5280, 5e-5);
    // midpoint rule: error <= (l dx^2 / 24) max|f''|
    EXPECT_NEAR(L0, exact, 0.25 * kMu * kMu * std::exp(kMu) * ex.grid.dx * ex.grid.dx / 24.0 * 2.0);
}

TEST(LyapunovValue, ShapeMismatch) {
    const auto g = build_grid(1.0, 10, 1.0, 1.0, 1.0);
    EXPECT_THROW(lyapunov_value(StateField(11, 2, 1), exp_weights(g), g.dx), InvalidParameter);
}

TEST(WeightBounds, Identity) {
    const auto g = build_grid(1.0, 10, 1.0, 1.0, 1.0);
    const auto b = weight_bounds(exp_weights(g, 1.0, 1.0, 0.0));
    EXPECT_EQ(b.zeta, 1.0);
    EXPECT_EQ(b.beta, 1.0);
}

TEST(WeightBounds, ExponentialLargestAtLastCell) {
    const auto g = build_grid(1.0, 1600, 10.0, 0.75, 1.0);
    const auto b = weight_bounds(exp_weights(g));
    EXPECT_DOUBLE_EQ(b.beta, std::exp(kMu * g.center(1599)));
    EXPECT_NEAR(b.beta, std::exp(kMu), 1e-3);
    EXPECT_DOUBLE_EQ(b.zeta, std::exp(-kMu * g.center(1599)));
}

TEST(WeightBounds, ChannelWeightsAtVanishingRate) {
    const auto g = build_grid(1.0, 1600, 10.0, 0.75, 7.42945);
    const auto b = weight_bounds(exp_weights(g, 0.0992, 0.2008, 1e-12));
    EXPECT_NEAR(b.zeta, 0.0992, 1e-12);
    EXPECT_NEAR(b.beta, 0.2008, 1e-12);
}

struct TableCase {
    int J;
    double cfl;
    double eta;
};

class DecayRateTable : public ::testing::TestWithParam<TableCase> {};

TEST_P(DecayRateTable, ClosedFormMatchesReferenceColumn) {
    const auto p = GetParam();
    const double dx = 1.0 / p.J;
    const double dt = p.cfl * dx;
    EXPECT_NEAR(decay_rate_exponential(kMu, 1.0, kXi, dt, dx), p.eta, 5e-5);
}

INSTANTIATE_TEST_SUITE_P(Reference, DecayRateTable,
                         ::testing::Values(TableCase{200, 0.75, 0.44862}, TableCase{400, 0.75, 0.44931},
                                           TableCase{800, 0.75, 0.44965}, TableCase{1600, 0.75, 0.44983},
                                           TableCase{200, 1.0, 0.44871}, TableCase{400, 1.0, 0.44935},
                                           TableCase{800, 1.0, 0.44968}, TableCase{1600, 1.0, 0.44984}));

TEST(DecayRate, SignChangeAtThreshold) {
    const double dx = 1.0 / 1600, dt = 0.75 / 1600;
    auto f = [&](double mu) { return decay_rate_exponential(mu, 1.0, kXi, dt, dx); };
    const double mu0 = bisect(f, 0.01, 1.0);
    EXPECT_NEAR(f(mu0), 0.0, 1e-14);
    EXPECT_LT(f(mu0 * (1 - 1e-9)), 0.0);
    EXPECT_GT(f(mu0 * (1 + 1e-9)), 0.0);
    // lower end of the window is xi up to O(dx)
    EXPECT_NEAR(mu0, kXi, 1e-5);
    const double mu1 = bisect(f, 100.0, 1e6);
    EXPECT_NEAR(mu1, 19098.926, 0.2);
}

TEST(DecayRate, ChannelThreshold) {
    const double dx = 1.0 / 1600, dt = 0.75 / (1600 * 7.42945);
    auto f = [&](double mu) { return decay_rate_exponential(mu, 1.42945, kXi, dt, dx); };
    EXPECT_NEAR(f(0.0875), 0.0, 1e-4);
    EXPECT_LT(f(0.08744), 0.0);
    EXPECT_GT(f(0.08746), 0.0);
    EXPECT_NEAR(bisect(f, 0.01, 1.0), 0.087446, 5e-6);
}

TEST(DecayRate, ChannelUpperEdgeCorrespondsToCoarseGrid) {
    // the reference upper edge 2008.457 is the root for dx = 1/200
    const double dx = 1.0 / 200, dt = 0.75 / (200 * 7.429447);
    auto f = [&](double mu) { return decay_rate_exponential(mu, 1.429447, kXi, dt, dx); };
    EXPECT_NEAR(bisect(f, 100.0, 1e5), 2008.457, 0.1);
}

TEST(DecayRate, DifferenceFormIsLargerBySmallAmount) {
    for (int J : {200, 400, 800, 1600}) {
        const double dx = 1.0 / J, dt = 0.75 * dx;
        const double a = decay_rate_exponential(kMu, 1.0, kXi, dt, dx);
        const double b = decay_rate_exponential_difference(kMu, 1.0, kXi, dt, dx);
        EXPECT_GT(b, a);
        EXPECT_LT(b - a, kMu * kMu * dx);
    }
    EXPECT_NEAR(decay_rate_exponential_difference(kMu, 1.0, kXi, 0.75 / 200, 1.0 / 200), 0.44944, 5e-6);
}

TEST(GronwallEnvelope, PureDecayWithoutDisturbance) {
    const std::vector<double> S(50, 0.0);
    const auto up = gronwall_envelope(1.0, 0.45, 1.7, kXi, 0.01, S);
    for (std::size_t n = 0; n < S.size(); ++n) EXPECT_DOUBLE_EQ(up[n], std::exp(-0.45 * 0.01 * n));
}

TEST(GronwallEnvelope, UsesPreviousSupremum) {
    const std::vector<double> S{0.0, 1.0, 2.0};
    const double c = 2.0 / 0.5 * (1.0 / kXi + 0.1);
    const auto up = gronwall_envelope(1.0, 0.5, 2.0, kXi, 0.1, S);
    EXPECT_DOUBLE_EQ(up[0], 1.0);
    EXPECT_DOUBLE_EQ(up[1], std::exp(-0.05));
    EXPECT_DOUBLE_EQ(up[2], std::exp(-0.1) + c * 1.0);
}

TEST(GronwallEnvelope, RefusesWithoutRate) {
    const std::vector<double> S(3, 0.0);
    EXPECT_THROW(gronwall_envelope(1.0, 0.0, 1.0, kXi, 0.1, S), NoCertificate);
    EXPECT_THROW(gronwall_envelope(1.0, -0.2, 1.0, kXi, 0.1, S), NoCertificate);
    EXPECT_THROW(gronwall_envelope(1.0, 20.0, 1.0, kXi, 0.1, S), NoCertificate);
}

TEST(GronwallEnvelope, LinearCaseOffset) {
    const auto ex = linear_example(1600, 0.75, 10.0, 0.5, 0.5, 0.01);
    const auto w = exp_weights(ex.grid);
    SimulationOptions opt;
    opt.eta = decay_rate_exponential(kMu, 1.0, kXi, ex.grid.dt, ex.grid.dx);
    const auto r = simulate(ex.coeffs, ex.grid, ex.feedback, ex.initial, w, kXi, opt);
    const auto& s = r.series;
    // sin^2(0) = 0, so the offset is absent at n = 0 and saturates at c * max S
    EXPECT_EQ(s.S.front(), 0.0);
    EXPECT_DOUBLE_EQ(s.L_up.front(), s.L.front());
    const double c = s.beta / s.eta * (1.0 / kXi + ex.grid.dt);
    EXPECT_NEAR(s.S.back(), 2.0 * 0.01 * 0.01, 1e-8);
    EXPECT_NEAR(c * s.S.back(), 6.3e-3, 5e-5);
    EXPECT_NEAR(s.L_up.back() - std::exp(-s.eta * s.t.back()) * s.L.front(), c * s.S.back(), 1e-15);
}

TEST(CheckTheta, LinearCaseMatchesDifferenceForm) {
    for (int J : {200, 1600}) {
        const auto ex = linear_example(J, 0.75, 10.0, 0.5, 0.5, 0.0);
        const auto th = check_theta(ex.coeffs, exp_weights(ex.grid), kXi, ex.grid);
        const double diff = decay_rate_exponential_difference(kMu, 1.0, kXi, ex.grid.dt, ex.grid.dx);
        const double closed = decay_rate_exponential(kMu, 1.0, kXi, ex.grid.dt, ex.grid.dx);
        EXPECT_NEAR(th.margin, diff, 1e-12);
        EXPECT_NEAR(th.margin, closed, std::abs(diff - closed) + 1e-15);
        EXPECT_TRUE(th.positive_definite());
        EXPECT_EQ(th.per_cell.size(), static_cast<std::size_t>(J));
    }
    const auto ex = linear_example(200, 0.75, 10.0, 0.5, 0.5, 0.0);
    EXPECT_NEAR(check_theta(ex.coeffs, exp_weights(ex.grid), kXi, ex.grid).margin, 0.44944, 5e-5);
}

TEST(CheckTheta, LargeXiFails) {
    const auto ex = linear_example(200, 0.75, 1.0, 0.5, 0.5, 0.0);
    const auto th = check_theta(ex.coeffs, exp_weights(ex.grid), 1e3, ex.grid);
    EXPECT_LT(th.margin, 0.0);
    EXPECT_FALSE(th.positive_definite());
}

TEST(CheckTheta, ConstantWeightsGiveMinusXi) {
    const auto ex = linear_example(100, 0.75, 1.0, 0.5, 0.5, 0.0);
    const auto th = check_theta(ex.coeffs, exp_weights(ex.grid, 1.0, 1.0, 0.0), kXi, ex.grid);
    EXPECT_DOUBLE_EQ(th.margin, -kXi);
    EXPECT_DOUBLE_EQ(th.min_entry, -kXi);
    EXPECT_FALSE(th.positive_definite());
}

TEST(CheckTheta, VariableSpeedEntriesByHand) {
    const auto g = build_grid(1.0, 6, 1.0, 0.5, 3.0);
    const auto c = sample_coefficients(
        g, 2, 1, [](double x) { return std::vector<double>{1.0 + x}; },
        [](double x) { return std::vector<double>{2.0 - x}; }, [](double) { return Matrix(2, 2); });
    const auto p = exp_weights(g, 1.0, 2.0, 0.3);
    const double xi = 0.2;
    const double a = 1.0 + xi * g.dt;
    const auto th = check_theta(c, p, xi, g);
    for (int j = 0; j < 6; ++j) {
        const double t1 = -a * (c.lambda_plus(j - 1, 0) * (p(j + 1, 0) - p(j, 0)) / g.dx +
                                (c.lambda_plus(j, 0) - c.lambda_plus(j - 1, 0)) / g.dx * p(j + 1, 0)) -
                          xi * p(j, 0);
        const double t2 = a * (c.lambda_minus(j + 1, 0) * (p(j, 1) - p(j - 1, 1)) / g.dx +
                               (c.lambda_minus(j + 1, 0) - c.lambda_minus(j, 0)) / g.dx * p(j - 1, 1)) -
                          xi * p(j, 1);
        EXPECT_NEAR(th.per_cell[static_cast<std::size_t>(j)], std::min(t1 / p(j, 0), t2 / p(j, 1)), 1e-12);
    }
}

TEST(CheckSource, ZeroSourceIsBorderline) {
    const auto ex = linear_example(50, 0.75, 1.0, 0.5, 0.5, 0.0);
    const auto s = check_source_matrix(ex.coeffs, exp_weights(ex.grid), ex.grid.dt);
    EXPECT_EQ(s.margin, 0.0);
    EXPECT_TRUE(s.psd());
}

TEST(CheckSource, BalancedChannelWeights) {
    const auto g = build_grid(1.0, 1600, 10.0, 0.75, 7.42945);
    const Matrix gamma{{0.0992, 0.2008}, {0.0992, 0.2008}};
    const auto c = constant_coefficients(g, {7.42945}, {1.42945}, gamma);
    // p1 gamma12 = p2 gamma21 with constant weights
    const auto s = check_source_matrix(c, exp_weights(g, 0.0992, 0.2008, 0.0), g.dt);
    EXPECT_TRUE(s.psd());
    EXPECT_GE(s.margin, -psd_tolerance(s.scale));
    // Gamma = (1, 1)^T (a, b) and P = diag(a, b) give M = (2 - (a + b) dt) (a, b)^T (a, b)
    const double a = 0.0992, b = 0.2008;
    const Matrix M = source_matrix(gamma, std::vector<double>{a, b}, g.dt);
    EXPECT_NEAR(M(0, 1), (2.0 - 0.3 * g.dt) * a * b, 1e-15);
    EXPECT_NEAR(M(0, 0), (2.0 - 0.3 * g.dt) * a * a, 1e-15);
    EXPECT_NEAR(s.margin, 0.0, 1e-15);
}

TEST(CheckSource, NegativeDefiniteSourceFails) {
    const auto g = build_grid(1.0, 20, 1.0, 0.5, 1.0);
    const auto c = constant_coefficients(g, {1.0}, {1.0}, Matrix{{-1.0, 0.0}, {0.0, -1.0}});
    const auto s = check_source_matrix(c, exp_weights(g, 1.0, 1.0, 0.0), g.dt);
    EXPECT_NEAR(s.margin, -2.0 - g.dt, 1e-12);
    EXPECT_FALSE(s.psd());
}

TEST(CheckSource, ClosedFormAgreesWithGeneralKernel) {
    Gen gen(21);
    for (int t = 0; t < 200; ++t) {
        const Matrix pi{{gen.uniform(-1, 1), gen.uniform(-1, 1)}, {gen.uniform(-1, 1), gen.uniform(-1, 1)}};
        const std::vector<double> p{gen.uniform(0.1, 2), gen.uniform(0.1, 2)};
        const Matrix M = source_matrix(pi, p, 0.01);
        const double tr = M(0, 0) + M(1, 1);
        const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
        const double sigma = 0.5 * (tr - std::sqrt(tr * tr - 4.0 * det));
        EXPECT_NEAR(sigma, jacobi_eigenvalues(M).front(), 1e-12);
    }
}

TEST(CheckBoundary, ZeroGainMargin) {
    const auto ex = linear_example(100, 0.75, 1.0, 0.0, 0.0, 0.0);
    const auto p = exp_weights(ex.grid);
    const auto b = check_boundary_matrix(ex.coeffs, p, FeedbackMatrix::zero(2, 1));
    EXPECT_DOUBLE_EQ(b.margin, std::min(p(100, 0), p(-1, 1)));
    EXPECT_GT(b.margin, 0.0);
}

TEST(CheckBoundary, LinearGainsWithinAndBeyondBound) {
    auto ex = linear_example(1600, 0.75, 10.0, 0.5, 0.5, 0.0);
    const auto p = exp_weights(ex.grid);
    EXPECT_TRUE(check_boundary_matrix(ex.coeffs, p, ex.feedback).psd());
    EXPECT_FALSE(check_boundary_matrix(ex.coeffs, p, FeedbackMatrix::two_by_two(0.5, 0.95)).psd());
    EXPECT_FALSE(check_boundary_matrix(ex.coeffs, p, FeedbackMatrix::two_by_two(1.01, 0.5)).psd());
    // the (1,1) entry: lambda1 p1(x_J) - k21^2 |lambda2| p2(x_{J-1})
    const auto B = boundary_matrix(ex.coeffs, p, FeedbackMatrix::two_by_two(0.5, 0.95));
    EXPECT_DOUBLE_EQ(B(0, 0), p(1600, 0) - 0.95 * 0.95 * p(1599, 1));
}

TEST(FeedbackBounds, LinearCase) {
    const auto ex = linear_example(1600, 0.75, 10.0, 0.5, 0.5, 0.0);
    const auto b = feedback_bounds(ex.coeffs, exp_weights(ex.grid));
    EXPECT_NEAR(b.k12_max, 1.0, 1e-15);
    // ghost-centered weights: x_J + x_{J-1} = 2l, so the ratio is exactly exp(-2 mu l)
    EXPECT_NEAR(b.k21_max, std::exp(-kMu), 1e-12);
    EXPECT_TRUE(check_boundary_matrix(ex.coeffs, exp_weights(ex.grid), FeedbackMatrix::two_by_two(1.0, b.k21_max * (1 - 1e-9))).psd());
}

TEST(FeedbackBounds, ChannelCase) {
    const auto g = build_grid(1.0, 1600, 10.0, 0.75, 7.42945);
    const auto c = constant_coefficients(g, {7.42945}, {1.42945}, Matrix(2, 2));
    const auto b0 = feedback_bounds(c, exp_weights(g, 0.0992, 0.2008, 0.0));
    EXPECT_NEAR(b0.k12_max, 0.6241, 1e-3);
    EXPECT_NEAR(b0.k21_max, 1.6024, 1e-3);
    for (double mu : {0.1, 0.3, 0.575}) {
        const auto b = feedback_bounds(c, exp_weights(g, 0.0992, 0.2008, mu));
        EXPECT_NEAR(b.k12_max, b0.k12_max, 1e-12);
        EXPECT_NEAR(b.k21_max, b0.k21_max * std::exp(-mu), 1e-12);
    }
}

TEST(FeedbackBounds, WrongShape) {
    const auto g = build_grid(1.0, 10, 1.0, 0.5, 2.0);
    const auto c = constant_coefficients(g, {1.0, 2.0}, {1.0}, Matrix(3, 3));
    const auto p = realize_weights(ExponentialWeights{{1.0, 1.0}, {1.0}, 0.5}, g, 3, 2);
    EXPECT_THROW(feedback_bounds(c, p), UnsupportedShape);
}

TEST(CheckConditions, LinearCaseAllPass) {
    const auto ex = linear_example(1600, 0.75, 10.0, 0.5, 0.5, 0.01);
    const auto r = check_conditions(ex.coeffs, exp_weights(ex.grid), ex.feedback, kXi, ex.grid);
    EXPECT_TRUE(r.all_ok());
    EXPECT_NEAR(r.eta_cert(), 0.44993, 1e-5);
    EXPECT_GT(r.bounds.beta / r.bounds.zeta, 1.0);
}

namespace {

ContinuousModel constant_model(double lp, double lm, Matrix pi = Matrix(2, 2)) {
    ContinuousModel m;
    m.k = 2;
    m.m = 1;
    m.lambda_plus = [lp](double) { return std::vector<double>{lp}; };
    m.lambda_minus = [lm](double) { return std::vector<double>{lm}; };
    m.pi = [pi](double) { return pi; };
    return m;
}

}  // namespace

TEST(CheckContinuous, ExponentialWeightsAboveThreshold) {
    const auto model = constant_model(1.0, 2.0);
    const auto r = check_continuous(model, exponential_weight_function({{1.0}, {1.0}, 0.2}), FeedbackMatrix::zero(2, 1),
                                    0.15, 100);
    EXPECT_TRUE(r.interior_ok());
    EXPECT_NEAR(r.interior_rate, 0.2 * 1.0 - 0.15, 1e-6);
    const auto bad = check_continuous(model, exponential_weight_function({{1.0}, {1.0}, 0.1}),
                                      FeedbackMatrix::zero(2, 1), 0.15, 100);
    EXPECT_FALSE(bad.interior_ok());
}

TEST(CheckContinuous, ConstantWeightsWithoutDissipation) {
    const auto r = check_continuous(constant_model(1.0, 1.0), exponential_weight_function({{1.0}, {1.0}, 0.0}),
                                    FeedbackMatrix::zero(2, 1), 0.0, 50);
    EXPECT_EQ(r.interior_margin, 0.0);
    EXPECT_FALSE(r.interior_ok());
}

TEST(CheckContinuous, BoundaryAgreesWithDiscreteOnFineGrid) {
    const auto model = constant_model(1.0, 1.0);
    const auto wf = exponential_weight_function({{1.0}, {1.0}, kMu});
    const auto ex = linear_example(1600, 0.75, 10.0, 0.5, 0.5, 0.0);
    for (double k21 : {0.3, 0.5, 0.55, 0.6, 0.95}) {
        const auto K = FeedbackMatrix::two_by_two(0.5, k21);
        const auto cont = check_continuous(model, wf, K, kXi, 200);
        const auto disc = check_boundary_matrix(ex.coeffs, exp_weights(ex.grid), K);
        EXPECT_EQ(cont.boundary_ok(), disc.psd()) << "k21=" << k21;
        EXPECT_NEAR(cont.boundary_margin, disc.margin, 2e-3);
    }
    EXPECT_THROW(check_continuous(model, wf, FeedbackMatrix::zero(2, 1), kXi, 1), InvalidParameter);
}

TEST(IssBound, ZeroStateHolds) {
    const auto ex = linear_example(50, 0.75, 1.0, 0.5, 0.5, 0.0);
    const auto r = simulate(ex.coeffs, ex.grid, ex.feedback, StateField(50, 2, 1), exp_weights(ex.grid), kXi);
    EXPECT_TRUE(iss_bound_check(r.series, 0.0, r.series.state_norm2));
}

TEST(IssBound, LinearCaseHoldsAndCorruptionFails) {
    const auto ex = linear_example(400, 0.75, 10.0, 0.5, 0.5, 0.01);
    SimulationOptions opt;
    opt.eta = decay_rate_exponential(kMu, 1.0, kXi, ex.grid.dt, ex.grid.dx);
    const auto r = simulate(ex.coeffs, ex.grid, ex.feedback, ex.initial, exp_weights(ex.grid), kXi, opt);
    const double w0 = ex.initial.norm2(ex.grid.dx);
    EXPECT_TRUE(iss_bound_check(r.series, w0, r.series.state_norm2));
    auto corrupted = r.series.state_norm2;
    corrupted[10] *= 100.0;  // W scaled by 10 while the transient dominates
    EXPECT_FALSE(iss_bound_check(r.series, w0, corrupted));
    auto no_rate = r.series;
    no_rate.eta = 0.0;
    EXPECT_THROW(iss_bound_check(no_rate, w0, r.series.state_norm2), NoCertificate);
}
