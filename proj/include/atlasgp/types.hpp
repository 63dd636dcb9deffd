#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace atlasgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IdList = std::vector<int>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Raised when input data is malformed or inconsistent.
class DataError : public Error {
public:
    using Error::Error;
};

/// Cholesky failure after the full jitter ladder.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double jitter)
        : Error(what), jitter_(jitter) {}
    double jitter() const { return jitter_; }

private:
    double jitter_;
};

class OptimizationError : public Error {
public:
    using Error::Error;
};

class CoverError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class BackwardMapError : public Error {
public:
    using Error::Error;
};

class TransitionError : public Error {
public:
    using Error::Error;
};

class DriftError : public Error {
public:
    using Error::Error;
};

class GridError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class AssignmentError : public Error {
public:
    using Error::Error;
};

class BaselineError : public Error {
public:
    using Error::Error;
};

} // namespace atlasgp
