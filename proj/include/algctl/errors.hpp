#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace algctl {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed expression source. Carries the byte offset of the failure and a
// description of what the parser expected there.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& expected, const std::string& msg)
        : Error(msg), offset_(offset), expected_(expected) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

// Evaluation failures: unbound variables and arithmetic domain errors
// (log of non-positive, division by zero, sqrt of negative, fractional
// power of a negative base).
class EvalError : public Error {
public:
    using Error::Error;
};

class DomainError : public EvalError {
public:
    DomainError(const std::string& msg, const std::string& subexpr)
        : EvalError(msg + " in '" + subexpr + "'"), subexpr_(subexpr) {}

    const std::string& subexpression() const noexcept { return subexpr_; }

private:
    std::string subexpr_;
};

// Inconsistent shapes: wrong vector lengths, mismatched base points, models
// applied to data of the wrong rank.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Solver-level failures: Newton non-convergence, singular Hessians or
// sensitivity matrices, non-finite states, basis extraction residuals.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg, double last_good_time = 0.0)
        : Error(msg), last_good_time_(last_good_time) {}

    double last_good_time() const noexcept { return last_good_time_; }

private:
    double last_good_time_;
};

// Configuration file problems (syntax, missing keys, dimension mismatches).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Unreadable inputs or unwritable outputs.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace algctl
