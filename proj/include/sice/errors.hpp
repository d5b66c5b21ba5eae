#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sice {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (p outside (0,1),
/// non-positive count, negative scale, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A closed form was requested for a distribution family that has none.
class UnsupportedClosedForm : public Error {
public:
    using Error::Error;
};

/// The selection rule keeps too small a fraction of candidates to sample.
class InfeasibleSelection : public Error {
public:
    using Error::Error;
};

/// Input data cannot support the requested statistic (zero variance, too few values).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// OLS design matrix is rank deficient.
class SingularDesign : public Error {
public:
    using Error::Error;
};

/// Cohen's estimating equation has no root for the observed moment ratio.
class NoValidRoot : public Error {
public:
    NoValidRoot(double ratio, double lo, double hi)
        : Error("estimating equation has no valid root: nu2/nu1^2 = " + std::to_string(ratio)
                + " outside attainable range (" + std::to_string(lo) + ", " + std::to_string(hi) + ")"),
          ratio_(ratio) {}

    double ratio() const noexcept { return ratio_; }

private:
    double ratio_;
};

/// A failure inside one replicate of a Monte Carlo run; carries the replicate index.
class ReplicateError : public Error {
public:
    ReplicateError(std::size_t replicate, const std::string& what)
        : Error("replicate " + std::to_string(replicate) + ": " + what), replicate_(replicate) {}

    std::size_t replicate() const noexcept { return replicate_; }

private:
    std::size_t replicate_;
};

/// Malformed tabular input; the message names the offending row.
class LoadError : public Error {
public:
    using Error::Error;
};

/// Output could not be written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid command line or configuration file.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace sice
