#pragma once

// Wigner functions over the quadratures x = a + a+, p = i(a+ - a).
// Normalization: integral over dx dp equals 1; vacuum peaks at 1/(2 pi) with
// unit quadrature variance. W(x,p) = (1/2pi) Tr{rho D(zeta) Pi}, zeta = x + i p.

#include "dopo/types.hpp"

#include <vector>

namespace dopo {

struct WignerGrid {
    RVec x;             // size nx
    RVec p;             // size np
    Eigen::MatrixXd w;  // np rows, nx cols: w(ip, ix) = W(x(ix), p(ip))
};

// Symmetric grid of n points spanning +-max(5, 4*sqrt(<x^2>)) for the state.
RVec default_axis(const Mat& rho, int n = 201);

// Displaced-parity evaluation through a normalized-Laguerre diagonal recurrence
// (no factorial overflow). The parallel version fans grid points out with
// OpenMP; the serial one is the reference implementation.
WignerGrid wigner_from_rho(const Mat& rho, const RVec& x, const RVec& p);
WignerGrid wigner_from_rho_serial(const Mat& rho, const RVec& x, const RVec& p);

double wigner_point(const Mat& rho, double x, double p);

// Gaussian state with mean (2 Re alpha, 2 Im alpha) and central moments m, n.
WignerGrid wigner_from_gaussian(cxd alpha, cxd m, double n, const RVec& x, const RVec& p);

struct GaussianComponent {
    double weight;
    cxd alpha;
    cxd m;
    double n;
};
WignerGrid wigner_from_gaussian_mixture(const std::vector<GaussianComponent>& parts,
                                        const RVec& x, const RVec& p);

// Sum of w * dx * dp (trapezoid in both axes).
double grid_integral(const WignerGrid& g);

} // namespace dopo
