#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace loglayer {

/// Base class for all errors thrown by this library.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid input data: bad domain parameters, mismatched grids, malformed config.
struct validation_error : error {
    using error::error;
};

/// A quantity that must be positive/finite came out otherwise (e.g. b1 <= 0,
/// non-finite field values, singular linear system).
struct numerical_error : error {
    using error::error;
};

/// An iteration failed to converge within its cap.  Carries the residual
/// history so callers can report how far the iteration got.
struct convergence_error : error {
    std::vector<double> residual_history;
    convergence_error(const std::string& msg, std::vector<double> history = {})
        : error(msg), residual_history(std::move(history)) {}
};

/// A structural property of a scheme was violated (e.g. monotone iteration
/// produced a non-monotone step, signalling a too-small relaxation constant).
struct scheme_error : error {
    using error::error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw validation_error(msg);
}

} // namespace loglayer
