#pragma once

#include <stdexcept>
#include <string>

namespace hyplyap {

/// Argument outside its admissible range (non-positive length, CFL > 1, ...).
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A realized Lyapunov weight entry is not strictly positive.
class InvalidWeight : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation only defined for a specific (k, m) shape.
class UnsupportedShape : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Boundary gain mapping with a vanishing denominator.
class SingularGain : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite or exploding state during time stepping.
class NumericalBlowup : public std::runtime_error {
public:
    NumericalBlowup(long step, const std::string& what)
        : std::runtime_error("numerical blowup at step " + std::to_string(step) + ": " + what),
          step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Decay rate is not positive, so no Gronwall envelope exists.
class NoCertificate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Steady-state integration left the subcritical regime.
class SteadyStateFailure : public std::runtime_error {
public:
    SteadyStateFailure(double x, const std::string& what)
        : std::runtime_error("steady state failure at x = " + std::to_string(x) + ": " + what), x_(x) {}

    double location() const noexcept { return x_; }

private:
    double x_;
};

/// Run configuration could not be parsed or validated.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, std::string key, const std::string& what)
        : std::runtime_error(format(line, key, what)), line_(line), key_(std::move(key)) {}

    int line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    static std::string format(int line, const std::string& key, const std::string& what) {
        std::string out = "config";
        if (line > 0) out += " line " + std::to_string(line);
        if (!key.empty()) out += " [" + key + "]";
        return out + ": " + what;
    }

    int line_;
    std::string key_;
};

}  // namespace hyplyap
