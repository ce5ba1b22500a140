#pragma once

#include <stdexcept>
#include <string>

namespace dopo {

// Bad dimensions, mismatched shapes, invalid parameter combinations.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A requested Fock-space size cannot represent the state faithfully.
// Carries the name of the observable (or diagnostic) that failed to converge.
struct TruncationError : std::runtime_error {
    std::string observable;
    TruncationError(const std::string& obs, const std::string& msg)
        : std::runtime_error(msg), observable(obs) {}
};

// Iterative or linear solver failed to reach its tolerance.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The null space of the generator is not one-dimensional within tolerance:
// the stationary state is not unique and a single density matrix is meaningless.
struct DegenerateSteadyStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The frame decomposition requires chi*|alpha_p| < gamma_s; outside that the
// signal reference generator has an unstable mode and the split is ill-posed.
struct IllPosedFrameError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Observable not defined for this state (e.g. g2 at zero photon number).
struct UndefinedObservableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested moment not supported by the Gaussian factorization engine.
struct UnsupportedMomentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace dopo
