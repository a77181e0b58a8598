#pragma once

#include <stdexcept>
#include <string>

namespace ldosim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad topology or element reference (unknown node, unknown break label, ...).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Netlist / parameter / config text could not be parsed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    [[nodiscard]] int line() const noexcept { return line_; }

private:
    int line_;
};

/// Invalid argument to an analysis or metric (nonpositive time, bad band, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Operating-point or load request outside the range a mode supports.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Missing or inconsistent run configuration (e.g. no V_EN stimulus).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Linear system could not be factored. `pivot` is the unknown index that failed.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string& what, std::size_t pivot)
        : Error(what), pivot_(pivot) {}
    [[nodiscard]] std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// Newton iteration did not converge. Carries the last residual norm.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Transient step control shrank the step below the floor without converging.
class StallError : public Error {
public:
    StallError(const std::string& what, double time)
        : Error(what), time_(time) {}
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace ldosim
