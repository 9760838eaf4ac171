#pragma once

#include <stdexcept>
#include <string>

namespace spiketest {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonSymmetricError : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };
struct PoleViolationError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct SpikeCountError : Error { using Error::Error; };
struct EqualSpikesError : Error { using Error::Error; };
struct NonDetectableError : Error { using Error::Error; };
struct MismatchedKError : Error { using Error::Error; };
struct SingularCovarianceError : Error { using Error::Error; };
struct MissingCalibrationError : Error { using Error::Error; };
struct InsufficientRepsError : Error { using Error::Error; };
struct DivisionByZeroError : Error { using Error::Error; };
struct NotOrthonormalError : Error { using Error::Error; };
struct InvalidParamError : Error { using Error::Error; };
struct InvalidConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace spiketest
