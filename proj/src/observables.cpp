#include "dopo/observables.hpp"
#include "dopo/errors.hpp"
#include "dopo/fock.hpp"

#include <cmath>

namespace dopo {

ModeMoments mode_moments(const Mat& rho) {
    const int d = int(rho.rows());
    cxd a1 = 0.0, a2 = 0.0;
    double nn = 0.0;
    // <a> = sum sqrt(n) rho_{n,n-1}; <a^2> = sum sqrt(n(n-1)) rho_{n,n-2}.
    for (int n = 1; n < d; ++n) a1 += std::sqrt(double(n)) * rho(n, n - 1);
    for (int n = 2; n < d; ++n) a2 += std::sqrt(double(n) * (n - 1)) * rho(n, n - 2);
    for (int n = 1; n < d; ++n) nn += double(n) * rho(n, n).real();
    ModeMoments mm;
    mm.alpha = a1;
    mm.m = a2 - a1 * a1;
    mm.n = nn - std::norm(a1);
    return mm;
}

double photon_number(const Mat& rho) {
    double nn = 0.0;
    for (int n = 1; n < rho.rows(); ++n) nn += double(n) * rho(n, n).real();
    return nn;
}

double g2(const Mat& rho) {
    const int d = int(rho.rows());
    double nn = photon_number(rho);
    if (nn <= 1e-12)
        throw UndefinedObservableError("g2 undefined: photon number " + std::to_string(nn));
    double a2a2 = 0.0;  // <a+^2 a^2> = sum n(n-1) rho_nn
    for (int n = 2; n < d; ++n) a2a2 += double(n) * (n - 1) * rho(n, n).real();
    return a2a2 / (nn * nn);
}

double g2_gaussian(cxd alpha, cxd m, double n) {
    double N = std::norm(alpha) + n;
    if (N <= 1e-12)
        throw UndefinedObservableError("g2 undefined: photon number " + std::to_string(N));
    double a4 = std::norm(alpha) * std::norm(alpha) +
                2.0 * (std::conj(alpha) * std::conj(alpha) * m).real() +
                4.0 * std::norm(alpha) * n + std::norm(m) + 2.0 * n * n;
    return a4 / (N * N);
}

QuadratureVariances quadrature_variances(const Mat& rho) {
    ModeMoments mm = mode_moments(rho);
    return quadrature_variances(mm.m, mm.n);
}

QuadratureVariances quadrature_variances(cxd m, double n) {
    return {1.0 + 2.0 * n + 2.0 * m.real(), 1.0 + 2.0 * n - 2.0 * m.real()};
}

double trace_distance(const Mat& rho, const Mat& sigma) {
    if (rho.rows() != sigma.rows()) throw DimensionError("trace_distance: size mismatch");
    Mat diff = hermitize(rho - sigma);
    Eigen::SelfAdjointEigenSolver<Mat> es(diff, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double min_eigenvalue(const Mat& rho) {
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(rho), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double overlap_fidelity(const Mat& rho, const Vec& psi) {
    if (rho.rows() != psi.size()) throw DimensionError("overlap_fidelity: size mismatch");
    return (psi.adjoint() * rho * psi).value().real();
}

} // namespace dopo
