#pragma once

#include "dopo/types.hpp"

namespace dopo {

// First and second moments of a single-mode state; m and n are central
// (fluctuation) moments: m = <a^2> - <a>^2, n = <a+a> - |<a>|^2.
struct ModeMoments {
    cxd alpha{0.0, 0.0};
    cxd m{0.0, 0.0};
    double n = 0.0;
};

ModeMoments mode_moments(const Mat& rho);

double photon_number(const Mat& rho);

// <a+^2 a^2> / <a+a>^2. Throws UndefinedObservableError when <a+a> <= 1e-12.
double g2(const Mat& rho);

// Gaussian-state g2 from amplitude plus central second moments.
double g2_gaussian(cxd alpha, cxd m, double n);

// Quadratures x = a + a+, p = i(a+ - a); vacuum variance 1.
struct QuadratureVariances {
    double var_x;
    double var_p;
};
QuadratureVariances quadrature_variances(const Mat& rho);
QuadratureVariances quadrature_variances(cxd m, double n);  // central moments

double trace_distance(const Mat& rho, const Mat& sigma);
double min_eigenvalue(const Mat& rho);

// <psi| rho |psi> for a pure reference state.
double overlap_fidelity(const Mat& rho, const Vec& psi);

} // namespace dopo
