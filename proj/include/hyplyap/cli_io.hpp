#pragma once

/**
 * @file cli_io.hpp
 * @brief Run configurations, presets and the run/check/table/sv commands.
 *
 * Config files are flat `key = value` text with `#` comments. Lists are
 * comma separated.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hyplyap/errors.hpp"
#include "hyplyap/grid.hpp"
#include "hyplyap/model.hpp"
#include "hyplyap/saint_venant.hpp"
#include "hyplyap/solver.hpp"
#include "hyplyap/stability.hpp"

namespace hyplyap::cli {

enum class ModelKind { linear2x2, saint_venant, custom_table };
enum class EtaSource { closed_form, certified };

struct RunConfig {
    ModelKind model = ModelKind::linear2x2;
    int cells = 1600;
    double cfl = 0.75;
    double final_time = 10.0;
    double length = 1.0;
    double xi = 0.125;
    double mu = 0.575;
    std::optional<double> p1;
    std::optional<double> p2;
    std::optional<double> k12;
    std::optional<double> k21;
    std::optional<double> amp;
    double stop_time = 5.0;

    double g = 9.81;
    double cf = 0.1;
    std::optional<double> sb = 0.0459;  ///< empty means the balancing slope
    double h0 = 2.0;
    double u0 = 3.0;
    double h_init = 2.5;
    double v_amp = 4.0;
    std::optional<double> kappa0;
    std::optional<double> kappal;
    bool friction_with_g = false;

    std::vector<double> lambda_plus;
    std::vector<double> lambda_minus;
    std::vector<double> pi;
    std::vector<double> w0;
    std::vector<double> k_minus;
    std::vector<double> k_plus;
    std::vector<double> p_plus;
    std::vector<double> p_minus;
    std::vector<double> psi;

    BoundaryTiming timing = BoundaryTiming::pre;
    bool strict = false;
    long record_stride = 1;
    std::string out;
    std::optional<EtaSource> eta_source;

    EtaSource resolved_eta_source() const {
        if (eta_source) return *eta_source;
        return model == ModelKind::custom_table ? EtaSource::certified : EtaSource::closed_form;
    }
};

inline const char* model_name(ModelKind k) {
    switch (k) {
        case ModelKind::linear2x2: return "linear2x2";
        case ModelKind::saint_venant: return "saint-venant";
        case ModelKind::custom_table: return "custom-table";
    }
    return "?";
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const std::string& v, int line, const std::string& key) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const double d = std::strtod(begin, &end);
    if (v.empty() || end != begin + v.size() || !std::isfinite(d))
        throw ConfigError(line, key, "expected a number, got '" + v + "'");
    return d;
}

inline long to_long(const std::string& v, int line, const std::string& key) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const long n = std::strtol(begin, &end, 10);
    if (v.empty() || end != begin + v.size()) throw ConfigError(line, key, "expected an integer, got '" + v + "'");
    return n;
}

inline bool to_bool(const std::string& v, int line, const std::string& key) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError(line, key, "expected true or false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& v, int line, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item), line, key));
    if (out.empty()) throw ConfigError(line, key, "expected a comma separated list");
    return out;
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "model", "J", "cfl", "T", "l", "xi", "mu", "p1", "p2", "k12", "k21", "amp", "stop-time", "g", "cf", "sb",
        "h0", "u0", "h-init", "v-amp", "kappa0", "kappal", "boundary-timing", "friction-with-g", "strict",
        "record-stride", "out", "eta-source", "lambda-plus", "lambda-minus", "pi", "w0", "k-minus", "k-plus",
        "p-plus", "p-minus", "psi"};
    return keys;
}

}  // namespace detail

/// Parses and validates a config text. Errors carry the offending line and key.
inline RunConfig parse_config(std::string_view text) {
    struct Entry {
        int line;
        std::string value;
    };
    std::map<std::string, Entry> entries;
    std::vector<std::string> unknown;
    int first_unknown = 0;

    std::stringstream ss{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(ss, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string body = detail::trim(raw);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(line, body, "expected 'key = value'");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError(line, "", "missing key");
        if (!detail::known_keys().count(key)) {
            if (unknown.empty()) first_unknown = line;
            unknown.push_back(key);
            continue;
        }
        if (entries.count(key)) throw ConfigError(line, key, "duplicate key");
        entries[key] = {line, value};
    }
    if (!unknown.empty()) {
        std::string list;
        for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError(first_unknown, unknown.front(), "unknown keys: " + list);
    }
    if (!entries.count("model")) throw ConfigError(0, "model", "missing required key");

    RunConfig c;
    auto num = [&](const char* key, auto check, const char* rule) -> std::optional<double> {
        auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        const double v = detail::to_double(it->second.value, it->second.line, key);
        if (!check(v)) throw ConfigError(it->second.line, key, std::string("value must be ") + rule);
        return v;
    };
    auto list = [&](const char* key) -> std::vector<double> {
        auto it = entries.find(key);
        if (it == entries.end()) return {};
        return detail::to_list(it->second.value, it->second.line, key);
    };
    auto text_of = [&](const char* key) -> std::optional<Entry> {
        auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        return it->second;
    };
    const auto positive = [](double v) { return v > 0.0; };
    const auto nonneg = [](double v) { return v >= 0.0; };
    const auto any = [](double) { return true; };

    const auto model = *text_of("model");
    if (model.value == "linear2x2") c.model = ModelKind::linear2x2;
    else if (model.value == "saint-venant") c.model = ModelKind::saint_venant;
    else if (model.value == "custom-table") c.model = ModelKind::custom_table;
    else throw ConfigError(model.line, "model", "expected linear2x2, saint-venant or custom-table");

    if (auto e = text_of("J")) {
        const long J = detail::to_long(e->value, e->line, "J");
        if (J < 2 || J > 10'000'000) throw ConfigError(e->line, "J", "value must be an integer >= 2");
        c.cells = static_cast<int>(J);
    }
    if (auto v = num("cfl", [](double x) { return x > 0.0 && x <= 1.0; }, "in (0, 1]")) c.cfl = *v;
    if (auto v = num("T", positive, "> 0")) c.final_time = *v;
    if (auto v = num("l", positive, "> 0")) c.length = *v;
    if (auto v = num("xi", positive, "> 0")) c.xi = *v;
    if (auto v = num("mu", nonneg, ">= 0")) c.mu = *v;
    c.p1 = num("p1", positive, "> 0");
    c.p2 = num("p2", positive, "> 0");
    c.k12 = num("k12", any, "a number");
    c.k21 = num("k21", any, "a number");
    c.amp = num("amp", nonneg, ">= 0");
    if (auto v = num("stop-time", nonneg, ">= 0")) c.stop_time = *v;
    if (auto v = num("g", positive, "> 0")) c.g = *v;
    if (auto v = num("cf", nonneg, ">= 0")) c.cf = *v;
    if (auto e = text_of("sb")) {
        if (e->value == "balanced") c.sb.reset();
        else c.sb = detail::to_double(e->value, e->line, "sb");
    }
    if (auto v = num("h0", positive, "> 0")) c.h0 = *v;
    if (auto v = num("u0", any, "a number")) c.u0 = *v;
    if (auto v = num("h-init", positive, "> 0")) c.h_init = *v;
    if (auto v = num("v-amp", any, "a number")) c.v_amp = *v;
    c.kappa0 = num("kappa0", any, "a number");
    c.kappal = num("kappal", any, "a number");
    if (c.kappa0.has_value() != c.kappal.has_value()) {
        const auto e = text_of(c.kappa0 ? "kappa0" : "kappal");
        throw ConfigError(e->line, c.kappa0 ? "kappa0" : "kappal", "kappa0 and kappal must be given together");
    }
    if (auto e = text_of("friction-with-g")) c.friction_with_g = detail::to_bool(e->value, e->line, "friction-with-g");
    if (auto e = text_of("strict")) c.strict = detail::to_bool(e->value, e->line, "strict");
    if (auto e = text_of("boundary-timing")) {
        if (e->value == "pre") c.timing = BoundaryTiming::pre;
        else if (e->value == "post") c.timing = BoundaryTiming::post;
        else throw ConfigError(e->line, "boundary-timing", "expected pre or post");
    }
    if (auto e = text_of("eta-source")) {
        if (e->value == "closed-form") c.eta_source = EtaSource::closed_form;
        else if (e->value == "certified") c.eta_source = EtaSource::certified;
        else throw ConfigError(e->line, "eta-source", "expected closed-form or certified");
    }
    if (auto e = text_of("record-stride")) {
        c.record_stride = detail::to_long(e->value, e->line, "record-stride");
        if (c.record_stride < 1) throw ConfigError(e->line, "record-stride", "value must be >= 1");
    }
    if (auto e = text_of("out")) c.out = e->value;

    c.lambda_plus = list("lambda-plus");
    c.lambda_minus = list("lambda-minus");
    c.pi = list("pi");
    c.w0 = list("w0");
    c.k_minus = list("k-minus");
    c.k_plus = list("k-plus");
    c.p_plus = list("p-plus");
    c.p_minus = list("p-minus");
    c.psi = list("psi");

    if (c.model == ModelKind::custom_table) {
        for (const char* key : {"lambda-plus", "lambda-minus", "w0"})
            if (!entries.count(key)) throw ConfigError(0, key, "required for model custom-table");
        const std::size_t m = c.lambda_plus.size();
        const std::size_t k = m + c.lambda_minus.size();
        auto line_of = [&](const char* key) { return entries.count(key) ? entries.at(key).line : 0; };
        auto expect = [&](const char* key, const std::vector<double>& v, std::size_t n) {
            if (!v.empty() && v.size() != n)
                throw ConfigError(line_of(key), key, "expected " + std::to_string(n) + " values, got " +
                                                         std::to_string(v.size()));
        };
        for (double v : c.lambda_plus)
            if (!(v > 0.0)) throw ConfigError(line_of("lambda-plus"), "lambda-plus", "speeds must be > 0");
        for (double v : c.lambda_minus)
            if (!(v > 0.0)) throw ConfigError(line_of("lambda-minus"), "lambda-minus", "magnitudes must be > 0");
        expect("pi", c.pi, k * k);
        expect("w0", c.w0, k);
        expect("k-minus", c.k_minus, m * (k - m));
        expect("k-plus", c.k_plus, (k - m) * m);
        expect("p-plus", c.p_plus, m);
        expect("p-minus", c.p_minus, k - m);
        expect("psi", c.psi, k);
        for (double v : c.p_plus)
            if (!(v > 0.0)) throw ConfigError(line_of("p-plus"), "p-plus", "weights must be > 0");
        for (double v : c.p_minus)
            if (!(v > 0.0)) throw ConfigError(line_of("p-minus"), "p-minus", "weights must be > 0");
    }
    return c;
}

/// Built-in configurations.
inline std::string preset_text(std::string_view name) {
    if (name == "linear-4.1")
        return "model = linear2x2\nJ = 1600\ncfl = 0.75\nT = 10\nxi = 0.125\nmu = 0.575\n"
               "p1 = 1\np2 = 1\nk12 = 0.5\nk21 = 0.5\namp = 0.01\n";
    if (name == "sv-4.2")
        return "model = saint-venant\nJ = 1600\ncfl = 0.75\nT = 10\nxi = 0.125\nmu = 0.575\n"
               "k12 = 0.75\nk21 = 0.75\namp = 0.25\n";
    throw ConfigError(0, "preset", "unknown preset '" + std::string(name) + "' (linear-4.1, sv-4.2)");
}

/// Everything needed to simulate and check one configuration.
struct Experiment {
    GridSpec grid;
    SystemCoefficients coeffs;
    FeedbackMatrix feedback;
    StateField initial;
    WeightSpec weight_spec;
    RealizedWeights weights;
    double xi = 0.0;
    double alpha = 0.0;      ///< min characteristic speed used by the closed-form rate
    double eta_closed = 0.0;
    double eta_cert = 0.0;
    double eta = 0.0;        ///< rate used for the envelope
    std::vector<std::string> warnings;
};

inline sv::SaintVenantSettings sv_settings(const RunConfig& c) {
    sv::SaintVenantSettings s;
    s.cells = c.cells;
    s.cfl = c.cfl;
    s.final_time = c.final_time;
    s.length = c.length;
    s.mu = c.mu;
    s.xi = c.xi;
    s.k12 = c.k12.value_or(0.75);
    s.k21 = c.k21.value_or(0.75);
    s.kappa0 = c.kappa0;
    s.kappal = c.kappal;
    s.params.g = c.g;
    s.params.cf = c.cf;
    s.params.friction_with_g = c.friction_with_g;
    s.params.sb = c.sb ? *c.sb : sv::balanced_slope(s.params, c.h0, c.u0);
    s.h0 = c.h0;
    s.u0 = c.u0;
    s.h_init = c.h_init;
    s.v_amp = c.v_amp;
    s.rain_amp = c.amp.value_or(0.25);
    s.stop_time = c.stop_time;
    s.p1 = c.p1;
    s.p2 = c.p2;
    return s;
}

inline Experiment build_experiment(const RunConfig& c) {
    Experiment ex;
    ex.xi = c.xi;
    switch (c.model) {
        case ModelKind::linear2x2: {
            auto lin = linear_example(c.cells, c.cfl, c.final_time, c.k12.value_or(0.5), c.k21.value_or(0.5),
                                      c.amp.value_or(0.01), c.stop_time, c.length);
            ex.grid = lin.grid;
            ex.coeffs = std::move(lin.coeffs);
            ex.feedback = lin.feedback;
            ex.initial = std::move(lin.initial);
            ex.weight_spec = ExponentialWeights{{c.p1.value_or(1.0)}, {c.p2.value_or(1.0)}, c.mu};
            break;
        }
        case ModelKind::saint_venant: {
            auto sx = sv::sv_experiment(sv_settings(c));
            ex.grid = sx.grid;
            ex.coeffs = std::move(sx.coeffs);
            ex.feedback = sx.feedback;
            ex.initial = std::move(sx.initial);
            ex.weight_spec = sx.weights;
            ex.warnings = std::move(sx.warnings);
            break;
        }
        case ModelKind::custom_table: {
            const std::size_t m = c.lambda_plus.size();
            const std::size_t k = m + c.lambda_minus.size();
            double lmax = 0.0;
            for (double v : c.lambda_plus) lmax = std::max(lmax, v);
            for (double v : c.lambda_minus) lmax = std::max(lmax, v);
            ex.grid = build_grid(c.length, c.cells, c.final_time, c.cfl, lmax);
            Matrix pi(k, k);
            for (std::size_t i = 0; i < c.pi.size(); ++i) pi(i / k, i % k) = c.pi[i];
            Disturbance psi;
            if (!c.psi.empty()) {
                psi = [v = c.psi, stop = c.stop_time](int, double t, std::span<double> out) {
                    for (std::size_t i = 0; i < v.size(); ++i) out[i] = t < stop ? v[i] : 0.0;
                };
            }
            ex.coeffs = constant_coefficients(ex.grid, c.lambda_plus, c.lambda_minus, pi, std::move(psi));
            ex.feedback = FeedbackMatrix::zero(k, m);
            for (std::size_t i = 0; i < c.k_minus.size(); ++i) ex.feedback.k_minus(i / (k - m), i % (k - m)) = c.k_minus[i];
            for (std::size_t i = 0; i < c.k_plus.size(); ++i) ex.feedback.k_plus(i / m, i % m) = c.k_plus[i];
            ex.initial = StateField(c.cells, k, m);
            for (int j = 0; j < c.cells; ++j)
                for (std::size_t i = 0; i < k; ++i) ex.initial(j, i) = c.w0[i];
            ExponentialWeights w{c.p_plus, c.p_minus, c.mu};
            if (w.p_plus.empty()) w.p_plus.assign(m, 1.0);
            if (w.p_minus.empty()) w.p_minus.assign(k - m, 1.0);
            ex.weight_spec = w;
            break;
        }
    }
    ex.weights = realize_weights(ex.weight_spec, ex.grid, ex.coeffs.k, ex.coeffs.m);
    ex.alpha = ex.coeffs.min_speed();
    ex.eta_closed = decay_rate_exponential(c.mu, ex.alpha, c.xi, ex.grid.dt, ex.grid.dx);
    ex.eta_cert = check_theta(ex.coeffs, ex.weights, c.xi, ex.grid).margin;
    ex.eta = c.resolved_eta_source() == EtaSource::closed_form ? ex.eta_closed : ex.eta_cert;
    return ex;
}

inline SimulationResult run_experiment(const Experiment& ex, BoundaryTiming timing) {
    SimulationOptions opt;
    opt.timing = timing;
    opt.eta = ex.eta;
    return simulate(ex.coeffs, ex.grid, ex.feedback, ex.initial, ex.weights, ex.xi, opt);
}

/// Piecewise-linear interpolation of the sampled coefficients, for the
/// continuous-in-x checker.
inline ContinuousModel interpolated_model(const SystemCoefficients& c, const GridSpec& grid) {
    ContinuousModel model;
    model.length = grid.length;
    model.k = c.k;
    model.m = c.m;
    const double dx = grid.dx;
    const int J = c.cells;
    auto locate = [dx, J](double x, int lo, int hi) {
        double s = x / dx - 0.5;
        int j = static_cast<int>(std::floor(s));
        j = std::clamp(j, lo, hi - 1);
        return std::pair<int, double>{j, s - j};
    };
    model.lambda_plus = [&c, locate, J](double x) {
        const auto [j, f] = locate(x, -1, J);
        std::vector<double> out;
        for (std::size_t i = 0; i < c.m; ++i) out.push_back((1 - f) * c.lambda_plus(j, i) + f * c.lambda_plus(j + 1, i));
        return out;
    };
    model.lambda_minus = [&c, locate, J](double x) {
        const auto [j, f] = locate(x, -1, J);
        std::vector<double> out;
        for (std::size_t i = 0; i < c.k - c.m; ++i)
            out.push_back((1 - f) * c.lambda_minus(j, i) + f * c.lambda_minus(j + 1, i));
        return out;
    };
    model.pi = [&c, locate, J](double x) {
        const auto [j, f] = locate(x, 0, J - 1);
        return (1 - f) * c.pi(j) + f * c.pi(j + 1);
    };
    return model;
}

/// Full condition report for one configuration.
struct CheckSummary {
    std::string model;
    int cells = 0;
    double dx = 0.0;
    double dt = 0.0;
    ConditionReport report;
    ContinuousReport continuous;
    bool has_continuous = false;
    double eta_closed = 0.0;
    double eta_cert = 0.0;
    double eta_difference = 0.0;
    std::optional<FeedbackBounds> bounds;
    std::vector<std::string> warnings;
    bool all_ok() const { return report.all_ok(); }
};

inline CheckSummary summarize_check(const RunConfig& cfg, const Experiment& ex) {
    CheckSummary s;
    s.model = model_name(cfg.model);
    s.cells = ex.grid.cells;
    s.dx = ex.grid.dx;
    s.dt = ex.grid.dt;
    s.report = check_conditions(ex.coeffs, ex.weights, ex.feedback, ex.xi, ex.grid);
    s.eta_closed = ex.eta_closed;
    s.eta_cert = s.report.eta_cert();
    s.eta_difference = decay_rate_exponential_difference(cfg.mu, ex.alpha, ex.xi, ex.grid.dt, ex.grid.dx);
    if (const auto* e = std::get_if<ExponentialWeights>(&ex.weight_spec)) {
        s.continuous = check_continuous(interpolated_model(ex.coeffs, ex.grid), exponential_weight_function(*e),
                                        ex.feedback, ex.xi, 200);
        s.has_continuous = true;
    }
    if (ex.coeffs.k == 2 && ex.coeffs.m == 1) s.bounds = feedback_bounds(ex.coeffs, ex.weights);
    s.warnings = ex.warnings;
    return s;
}

namespace detail {

inline std::string fmt(double v, int digits = 17) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline const char* verdict(bool ok) { return ok ? "true" : "false"; }

}  // namespace detail

inline void write_check_text(const CheckSummary& s, std::ostream& os) {
    using detail::fmt;
    using detail::verdict;
    os << "model " << s.model << "  J = " << s.cells << "  dx = " << fmt(s.dx, 6) << "  dt = " << fmt(s.dt, 6) << "\n";
    os << "condition                verdict  margin\n";
    char line[160];
    auto row = [&](const char* name, bool ok, double margin) {
        std::snprintf(line, sizeof line, "%-24s %-8s %.6g\n", name, verdict(ok), margin);
        os << line;
    };
    row("theta (discrete)", s.report.theta_ok(), s.report.theta.margin);
    row("source M_j", s.report.source_ok(), s.report.source.margin);
    row("boundary B_c", s.report.boundary_ok(), s.report.boundary.margin);
    if (s.has_continuous) {
        row("interior (continuous)", s.continuous.interior_ok(), s.continuous.interior_margin);
        row("boundary (continuous)", s.continuous.boundary_ok(), s.continuous.boundary_margin);
    }
    os << "eta certified      " << fmt(s.eta_cert, 8) << "\n";
    os << "eta closed form    " << fmt(s.eta_closed, 8) << "\n";
    os << "eta difference     " << fmt(s.eta_difference, 8) << "\n";
    os << "zeta               " << fmt(s.report.bounds.zeta, 8) << "\n";
    os << "beta               " << fmt(s.report.bounds.beta, 8) << "\n";
    os << "C = beta/zeta      " << fmt(s.report.bounds.beta / s.report.bounds.zeta, 8) << "\n";
    if (s.bounds) {
        os << "|k12| bound        " << fmt(s.bounds->k12_max, 8) << "\n";
        os << "|k21| bound        " << fmt(s.bounds->k21_max, 8) << "\n";
    }
    for (const auto& w : s.warnings) os << "warning: " << w << "\n";
    os << "all conditions     " << verdict(s.all_ok()) << "\n";
}

/// Writes the CSV series. Rows every `stride` steps plus the last one.
inline void write_series_csv(const RunConfig& cfg, const Experiment& ex, const SimulationResult& r, std::ostream& os,
                             bool with_header = true, std::optional<double> mu_column = std::nullopt) {
    using detail::fmt;
    const auto& s = r.series;
    if (with_header) {
        os << "# model: " << model_name(cfg.model) << "\n";
        os << "# J: " << ex.grid.cells << "\n";
        os << "# cfl: " << fmt(ex.grid.cfl) << "\n";
        os << "# dx: " << fmt(ex.grid.dx) << "\n";
        os << "# dt: " << fmt(ex.grid.dt) << "\n";
        os << "# steps: " << ex.grid.steps << "\n";
        os << "# t_final: " << fmt(ex.grid.time(ex.grid.steps)) << "\n";
        os << "# xi: " << fmt(ex.xi) << "\n";
        os << "# mu: " << fmt(cfg.mu) << "\n";
        os << "# eta: " << fmt(ex.eta) << " ("
           << (cfg.resolved_eta_source() == EtaSource::closed_form ? "closed-form" : "certified") << ")\n";
        os << "# zeta: " << fmt(s.zeta) << "\n";
        os << "# beta: " << fmt(s.beta) << "\n";
        os << "# C: " << fmt(s.C()) << "\n";
        os << "# boundary-timing: " << (cfg.timing == BoundaryTiming::pre ? "pre" : "post") << "\n";
        if (!s.has_envelope()) os << "# envelope: none (eta <= 0 or eta*dt >= 1)\n";
        os << (mu_column ? "mu," : "") << "n,t,L,L_up,S,l2_state\n";
    }
    const std::size_t N = s.L.size();
    for (std::size_t n = 0; n < N; ++n) {
        if (n % static_cast<std::size_t>(cfg.record_stride) != 0 && n + 1 != N) continue;
        if (mu_column) os << fmt(*mu_column) << ",";
        os << n << "," << fmt(s.t[n]) << "," << fmt(s.L[n]) << "," << (s.has_envelope() ? fmt(s.L_up[n]) : "nan")
           << "," << fmt(s.S[n]) << "," << fmt(s.state_norm2[n]) << "\n";
    }
}

/// Exit codes shared by all commands.
enum ExitCode : int { kOk = 0, kConfigError = 1, kConditionFailure = 2, kBlowup = 3 };

/// Maps exceptions from configuration, assembly and simulation to exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalBlowup& e) {
        err << e.what() << "\n";
        return kBlowup;
    } catch (const SteadyStateFailure& e) {
        err << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kConfigError;
    }
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto ex = build_experiment(cfg);
        for (const auto& w : ex.warnings) err << "warning: " << w << "\n";
        if (cfg.strict) {
            const auto rep = check_conditions(ex.coeffs, ex.weights, ex.feedback, ex.xi, ex.grid);
            if (!rep.all_ok()) {
                err << "conditions failed (theta " << detail::verdict(rep.theta_ok()) << ", source "
                    << detail::verdict(rep.source_ok()) << ", boundary " << detail::verdict(rep.boundary_ok())
                    << ")\n";
                return int(kConditionFailure);
            }
        }
        const auto res = run_experiment(ex, cfg.timing);
        write_series_csv(cfg, ex, res, out);
        return int(kOk);
    });
}

inline int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream& err,
                     std::optional<CheckSummary>* summary = nullptr) {
    return guarded(err, [&] {
        const auto ex = build_experiment(cfg);
        auto s = summarize_check(cfg, ex);
        write_check_text(s, out);
        const bool ok = s.all_ok();
        if (summary) *summary = std::move(s);
        return int(cfg.strict && !ok ? kConditionFailure : kOk);
    });
}

struct TableRow {
    int cells = 0;
    double linf_diff = 0.0;
    double l2_diff = 0.0;
    double mu = 0.0;
    double eta = 0.0;
    bool dominated = false;
};

/// max_n |L_up - L| and sqrt(dt sum_n (L_up - L)^2) over n = 0..N.
inline std::pair<double, double> envelope_gap_norms(const LyapunovSeries& s) {
    double linf = 0.0;
    double sum = 0.0;
    for (std::size_t n = 0; n < s.L.size(); ++n) {
        const double d = s.L_up[n] - s.L[n];
        linf = std::max(linf, std::abs(d));
        sum += d * d;
    }
    return {linf, std::sqrt(s.dt * sum)};
}

inline double table_cfl(std::string_view variant) {
    if (variant == "cfl075") return 0.75;
    if (variant == "cfl100") return 1.0;
    throw ConfigError(0, "variant", "expected cfl075 or cfl100");
}

/// Rows of the decay-rate table for the 2x2 linear case; the J values run in parallel.
inline std::vector<TableRow> table_rows(double cfl, std::vector<int> cells = {200, 400, 800, 1600}) {
    std::vector<std::future<TableRow>> jobs;
    for (int J : cells) {
        jobs.push_back(std::async(std::launch::async, [J, cfl] {
            RunConfig c = parse_config(preset_text("linear-4.1"));
            c.cells = J;
            c.cfl = cfl;
            const auto ex = build_experiment(c);
            const auto res = run_experiment(ex, c.timing);
            TableRow row;
            row.cells = J;
            row.mu = c.mu;
            row.eta = ex.eta_closed;
            std::tie(row.linf_diff, row.l2_diff) = envelope_gap_norms(res.series);
            row.dominated = true;
            for (std::size_t n = 0; n < res.series.L.size(); ++n)
                if (res.series.L[n] > res.series.L_up[n]) row.dominated = false;
            return row;
        }));
    }
    std::vector<TableRow> rows;
    for (auto& j : jobs) rows.push_back(j.get());
    return rows;
}

inline void write_table(const std::vector<TableRow>& rows, double cfl, bool markdown, std::ostream& os) {
    using detail::fmt;
    os << "# norms: max_n / sqrt(dt*sum)\n";
    os << "# cfl: " << fmt(cfl) << "  xi: 0.125  T: 10  k12 = k21 = 0.5\n";
    if (markdown) {
        os << "| J | Linf_diff | L2_diff | mu | eta |\n";
        os << "|---|---|---|---|---|\n";
        for (const auto& r : rows)
            os << "| " << r.cells << " | " << fmt(r.linf_diff, 5) << " | " << fmt(r.l2_diff, 5) << " | "
               << fmt(r.mu, 5) << " | " << fmt(r.eta, 5) << " |\n";
    } else {
        os << "J,Linf_diff,L2_diff,mu,eta\n";
        for (const auto& r : rows)
            os << r.cells << "," << fmt(r.linf_diff) << "," << fmt(r.l2_diff) << "," << fmt(r.mu) << ","
               << fmt(r.eta) << "\n";
    }
}

inline int cmd_table(std::string_view variant, bool markdown, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const double cfl = table_cfl(variant);
        write_table(table_rows(cfl), cfl, markdown, out);
        return int(kOk);
    });
}

inline const std::vector<double>& sv_mu_sweep() {
    static const std::vector<double> mus{0.1, 0.3, 0.575};
    return mus;
}

struct SweepRun {
    double mu = 0.0;
    Experiment experiment;
    SimulationResult result;
};

/// Runs the Saint-Venant configuration once per mu, in parallel.
inline std::vector<SweepRun> sv_sweep(const RunConfig& base, const std::vector<double>& mus = sv_mu_sweep()) {
    std::vector<std::future<SweepRun>> jobs;
    for (double mu : mus) {
        jobs.push_back(std::async(std::launch::async, [base, mu] {
            RunConfig c = base;
            c.mu = mu;
            SweepRun run;
            run.mu = mu;
            run.experiment = build_experiment(c);
            run.result = run_experiment(run.experiment, c.timing);
            return run;
        }));
    }
    std::vector<SweepRun> runs;
    for (auto& j : jobs) runs.push_back(j.get());
    return runs;
}

inline int cmd_sv(const RunConfig& base, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (base.model != ModelKind::saint_venant) throw ConfigError(0, "model", "sv requires model = saint-venant");
        const auto runs = sv_sweep(base);
        using detail::fmt;
        out << "# mu sweep: 0.1, 0.3, 0.575\n";
        for (const auto& r : runs) {
            const auto& s = r.result.series;
            bool dom = s.has_envelope();
            for (std::size_t n = 0; dom && n < s.L.size(); ++n) dom = s.L[n] <= s.L_up[n];
            out << "# mu " << fmt(r.mu) << ": eta " << fmt(r.experiment.eta, 8) << ", L0 " << fmt(s.L.front(), 8)
                << ", LN " << fmt(s.L.back(), 8) << ", LN/L0 " << fmt(s.L.back() / s.L.front(), 6)
                << ", dominated " << detail::verdict(dom) << "\n";
            for (const auto& w : r.experiment.warnings) err << "warning (mu " << fmt(r.mu) << "): " << w << "\n";
        }
        bool first = true;
        for (const auto& r : runs) {
            RunConfig c = base;
            c.mu = r.mu;
            write_series_csv(c, r.experiment, r.result, out, first, r.mu);
            first = false;
        }
        return int(kOk);
    });
}

}  // namespace hyplyap::cli
