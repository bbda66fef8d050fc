#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyplyap/cli_io.hpp"

namespace {

using namespace hyplyap;
using namespace hyplyap::cli;

struct Options {
    std::string config;
    std::string preset;
    std::string out;
    bool strict = false;
    std::string variant = "cfl075";
    std::string format;
};

RunConfig load(const Options& o, const char* fallback_preset) {
    if (!o.config.empty() && !o.preset.empty()) throw ConfigError(0, "config", "--config and --preset are exclusive");
    std::string text;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw ConfigError(0, "config", "cannot read " + o.config);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    } else if (!o.preset.empty()) {
        text = preset_text(o.preset);
    } else if (fallback_preset) {
        text = preset_text(fallback_preset);
    } else {
        throw ConfigError(0, "config", "give --config PATH or --preset NAME");
    }
    RunConfig cfg = parse_config(text);
    if (o.strict) cfg.strict = true;
    if (!o.out.empty()) cfg.out = o.out;
    return cfg;
}

nlohmann::json to_json(const CheckSummary& s) {
    const auto& r = s.report;
    nlohmann::json j{
        {"model", s.model},
        {"J", s.cells},
        {"dx", s.dx},
        {"dt", s.dt},
        {"theta", {{"ok", r.theta_ok()}, {"margin", r.theta.margin}}},
        {"source", {{"ok", r.source_ok()}, {"margin", r.source.margin}}},
        {"boundary", {{"ok", r.boundary_ok()}, {"margin", r.boundary.margin}}},
        {"eta_certified", s.eta_cert},
        {"eta_closed_form", s.eta_closed},
        {"eta_difference", s.eta_difference},
        {"zeta", r.bounds.zeta},
        {"beta", r.bounds.beta},
        {"C", r.bounds.beta / r.bounds.zeta},
        {"all_ok", s.all_ok()},
        {"warnings", s.warnings},
    };
    if (s.has_continuous) {
        j["continuous"] = {{"interior_ok", s.continuous.interior_ok()},
                           {"interior_margin", s.continuous.interior_margin},
                           {"boundary_ok", s.continuous.boundary_ok()},
                           {"boundary_margin", s.continuous.boundary_margin}};
    }
    if (s.bounds) j["feedback_bounds"] = {{"k12_max", s.bounds->k12_max}, {"k21_max", s.bounds->k21_max}};
    return j;
}

/// Runs `body` with a stream that is either stdout or the configured file.
template <class F>
int with_output(const std::string& path, F&& body) {
    if (path.empty()) return body(std::cout);
    std::ofstream file(path);
    if (!file) {
        std::cerr << "cannot write " << path << "\n";
        return kConfigError;
    }
    return body(file);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Upwind finite-volume simulation and ISS-Lyapunov checks for 1-D linear balance laws"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "config file (key = value)");
        sub->add_option("--preset", o.preset, "built-in config: linear-4.1 or sv-4.2");
        sub->add_option("--out", o.out, "output path (default stdout)");
        sub->add_flag("--strict", o.strict, "fail with exit code 2 when a condition fails");
    };

    auto* run = app.add_subcommand("run", "simulate and write the Lyapunov series as CSV");
    add_common(run);
    auto* check = app.add_subcommand("check", "report the stability conditions");
    add_common(check);
    check->add_option("--format", o.format, "text or json")->check(CLI::IsMember({"text", "json"}));
    auto* table = app.add_subcommand("table", "decay-rate table over J = 200, 400, 800, 1600");
    table->add_option("--variant", o.variant, "cfl075 or cfl100")->check(CLI::IsMember({"cfl075", "cfl100"}));
    table->add_option("--format", o.format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
    table->add_option("--out", o.out, "output path (default stdout)");
    auto* svc = app.add_subcommand("sv", "Saint-Venant run for mu = 0.1, 0.3, 0.575");
    add_common(svc);

    CLI11_PARSE(app, argc, argv);

    if (*run) {
        return guarded(std::cerr, [&] {
            const auto cfg = load(o, nullptr);
            return with_output(cfg.out, [&](std::ostream& os) { return cmd_run(cfg, os, std::cerr); });
        });
    }
    if (*check) {
        return guarded(std::cerr, [&] {
            const auto cfg = load(o, nullptr);
            return with_output(cfg.out, [&](std::ostream& os) {
                if (o.format != "json") return cmd_check(cfg, os, std::cerr);
                std::optional<CheckSummary> summary;
                std::ostringstream text;
                const int rc = cmd_check(cfg, text, std::cerr, &summary);
                if (summary) os << to_json(*summary).dump(2) << "\n";
                return rc;
            });
        });
    }
    if (*table) {
        return with_output(o.out, [&](std::ostream& os) {
            return cmd_table(o.variant, o.format != "csv", os, std::cerr);
        });
    }
    return guarded(std::cerr, [&] {
        const auto cfg = load(o, "sv-4.2");
        return with_output(cfg.out, [&](std::ostream& os) { return cmd_sv(cfg, os, std::cerr); });
    });
}
