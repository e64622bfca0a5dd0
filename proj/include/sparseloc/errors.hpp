#pragma once

#include <stdexcept>
#include <string>

namespace sparseloc {

// Precondition failures use std::invalid_argument directly. The types below
// cover failures that carry numerical context.

class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}

    /// Residual, error estimate or partial sum reached before giving up.
    double achieved() const { return achieved_; }

private:
    double achieved_;
};

class DivergedError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A truncation box could not be certified; the caller must enlarge it.
class EnlargeDomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FitDegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sparseloc
