#pragma once

#include <stdexcept>
#include <string>

namespace plancherel {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameter (multiplicity, family, grid, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Matrix does not satisfy the defining relations of its model.
class InvalidElementError : public Error {
public:
    using Error::Error;
};

/// Weyl group closure exceeded its element cap.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Quadrature did not reach the requested self-consistency.
class QuadratureError : public Error {
public:
    using Error::Error;
};

/// Calibration residuals disagree across test functions.
class CalibrationError : public Error {
public:
    using Error::Error;
};

/// Spectral parameter outside the convergence domain of an integral.
class ConvergenceDomainError : public Error {
public:
    using Error::Error;
};

/// Argument lies on a pole of a Gamma factor.
class PoleError : public Error {
public:
    PoleError(const std::string& what, int root_index = -1)
        : Error(what), root_index_(root_index) {}
    /// Index of the offending positive root, or -1 for a bare Gamma pole.
    int root_index() const noexcept { return root_index_; }

private:
    int root_index_;
};

/// Spectral parameter on a wall where a regular one is required.
class SingularParameterError : public Error {
public:
    using Error::Error;
};

/// Support or spectral tail exceeds the configured grid.
class TruncationError : public Error {
public:
    TruncationError(const std::string& what, double suggested = 0.0)
        : Error(what), suggested_(suggested) {}
    /// Suggested enlarged bound (0 when not applicable).
    double suggested_bound() const noexcept { return suggested_; }

private:
    double suggested_;
};

/// Operation invoked on an object that is not ready for it.
class StateError : public Error {
public:
    using Error::Error;
};

} // namespace plancherel
