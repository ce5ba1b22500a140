#pragma once

// Adaptive Dormand-Prince 5(4) stepper on complex state vectors, shared by the
// vectorized Liouvillian flows and the matrix/moment equation sets.

#include "dopo/types.hpp"

#include <functional>

namespace dopo {

struct EvolveConfig {
    double rtol = 1e-8;
    double atol = 1e-10;
    // Steady-state declaration: rms of the raw time derivative falls below this.
    double steady_residual = 1e-9;
    double max_time = 2000.0;
    double initial_dt = 1e-4;
    double max_dt = 1.0;
};

// dy = f(t, y); dy is preallocated by the caller contract (same size as y).
using Rhs = std::function<void(double, const Vec&, Vec&)>;

// Advance y in place from t0 to t1. Returns the number of accepted steps.
long integrate_to(const Rhs& f, Vec& y, double t0, double t1, const EvolveConfig& cfg);

struct SteadyRun {
    double t_end = 0.0;
    double residual = 0.0;  // rms |dy/dt| at the final point
    bool converged = false;
    long steps = 0;
};

// Advance until rms|dy/dt| < cfg.steady_residual or t exceeds cfg.max_time.
// `watch`, when set, is called after each accepted step (monitoring/output).
SteadyRun integrate_to_steady(const Rhs& f, Vec& y, double t0, const EvolveConfig& cfg,
                              const std::function<void(double, const Vec&)>& watch = {});

// rms of |dy| for steady-state residuals.
double rms_norm(const Vec& v);

} // namespace dopo
