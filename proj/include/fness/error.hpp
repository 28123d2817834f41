// error.hpp — exception hierarchy shared by all fness modules.
//
// Each category maps onto one CLI exit code (see app.hpp).

#pragma once

#include <stdexcept>
#include <string>

namespace fness {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

// Invalid user input: malformed config, violated model invariants.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

// A numerical operation could not produce a trustworthy result.
class NumericalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical"; }
};

// Incoming energy sits exactly on a channel threshold.
class ThresholdError : public NumericalError {
public:
    using NumericalError::NumericalError;
    const char* kind() const noexcept override { return "threshold"; }
};

// A limit, extrapolation or truncation check failed its guard.
class ConvergenceError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "convergence"; }
};

} // namespace fness
