#include "dopo/wigner.hpp"
#include "dopo/errors.hpp"
#include "dopo/observables.hpp"

#include <cmath>

namespace dopo {

namespace {

// W(x,p) for one phase-space point. Runs the normalized associated-Laguerre
// recurrence along each superdiagonal k of rho:
//   phi_n^(k)(r) = sqrt(n!/(n+k)!) r^(k/2) e^(-r/2) L_n^(k)(r),
// which keeps every factor bounded by one, so no factorial overflow occurs.
// Contributions with k < 0 are the conjugates of k > 0 (rho Hermitian).
double point_kernel(const Mat& rho, double x, double p) {
    const int d = int(rho.rows());
    const double r = x * x + p * p;
    const double th = std::atan2(p, x);
    const cxd eith(std::cos(th), std::sin(th));
    double acc = 0.0;
    cxd ph(1.0, 0.0);
    for (int k = 0; k < d; ++k) {
        double phi_prev = 0.0;
        double phi;
        if (k == 0) phi = std::exp(-0.5 * r);
        else if (r <= 0.0) phi = 0.0;
        else phi = std::exp(0.5 * (k * std::log(r) - std::lgamma(double(k) + 1.0)) - 0.5 * r);
        cxd inner = 0.0;
        double sign = 1.0;
        for (int m = 0; m + k < d; ++m) {
            inner += sign * rho(m, m + k) * phi;
            sign = -sign;
            // advance phi_m -> phi_{m+1}
            double next = ((2.0 * m + k + 1.0 - r) * phi -
                           std::sqrt(double(m) * (m + k)) * phi_prev) /
                          (double(m) + 1.0) * std::sqrt((m + 1.0) / (m + 1.0 + k));
            phi_prev = phi;
            phi = next;
        }
        if (k == 0) acc += inner.real();
        else {
            ph *= eith;
            acc += 2.0 * (ph * inner).real();
        }
    }
    return acc / (2.0 * M_PI);
}

WignerGrid run_grid(const Mat& rho, const RVec& x, const RVec& p, bool parallel) {
    WignerGrid g;
    g.x = x;
    g.p = p;
    g.w.resize(p.size(), x.size());
    const int np = int(p.size()), nx = int(x.size());
    if (parallel) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int ip = 0; ip < np; ++ip)
            for (int ix = 0; ix < nx; ++ix)
                g.w(ip, ix) = point_kernel(rho, x(ix), p(ip));
    } else {
        for (int ip = 0; ip < np; ++ip)
            for (int ix = 0; ix < nx; ++ix)
                g.w(ip, ix) = point_kernel(rho, x(ix), p(ip));
    }
    return g;
}

} // namespace

RVec default_axis(const Mat& rho, int n) {
    if (n < 3) throw DimensionError("Wigner axis needs at least 3 points");
    ModeMoments mm = mode_moments(rho);
    double x2 = quadrature_variances(mm.m, mm.n).var_x + 4.0 * mm.alpha.real() * mm.alpha.real();
    double p2 = quadrature_variances(mm.m, mm.n).var_p + 4.0 * mm.alpha.imag() * mm.alpha.imag();
    double ext = std::max(5.0, 4.0 * std::sqrt(std::max(x2, p2)));
    return RVec::LinSpaced(n, -ext, ext);
}

WignerGrid wigner_from_rho(const Mat& rho, const RVec& x, const RVec& p) {
    return run_grid(rho, x, p, true);
}

WignerGrid wigner_from_rho_serial(const Mat& rho, const RVec& x, const RVec& p) {
    return run_grid(rho, x, p, false);
}

double wigner_point(const Mat& rho, double x, double p) { return point_kernel(rho, x, p); }

WignerGrid wigner_from_gaussian(cxd alpha, cxd m, double n, const RVec& x, const RVec& p) {
    return wigner_from_gaussian_mixture({{1.0, alpha, m, n}}, x, p);
}

WignerGrid wigner_from_gaussian_mixture(const std::vector<GaussianComponent>& parts,
                                        const RVec& x, const RVec& p) {
    WignerGrid g;
    g.x = x;
    g.p = p;
    g.w = Eigen::MatrixXd::Zero(p.size(), x.size());
    for (const auto& c : parts) {
        double sxx = 1.0 + 2.0 * c.n + 2.0 * c.m.real();
        double spp = 1.0 + 2.0 * c.n - 2.0 * c.m.real();
        double sxp = 2.0 * c.m.imag();
        double det = sxx * spp - sxp * sxp;
        if (det <= 0) throw SolverError("Gaussian covariance not positive definite");
        double ixx = spp / det, ipp = sxx / det, ixp = -sxp / det;
        double x0 = 2.0 * c.alpha.real(), p0 = 2.0 * c.alpha.imag();
        double norm = c.weight / (2.0 * M_PI * std::sqrt(det));
        for (int ip = 0; ip < p.size(); ++ip)
            for (int ix = 0; ix < x.size(); ++ix) {
                double dx = x(ix) - x0, dp = p(ip) - p0;
                double q = ixx * dx * dx + 2.0 * ixp * dx * dp + ipp * dp * dp;
                g.w(ip, ix) += norm * std::exp(-0.5 * q);
            }
    }
    return g;
}

double grid_integral(const WignerGrid& g) {
    const int np = int(g.p.size()), nx = int(g.x.size());
    if (np < 2 || nx < 2) throw DimensionError("grid_integral needs a 2d grid");
    double dx = (g.x(nx - 1) - g.x(0)) / (nx - 1);
    double dp = (g.p(np - 1) - g.p(0)) / (np - 1);
    double acc = 0.0;
    for (int ip = 0; ip < np; ++ip) {
        double wp = (ip == 0 || ip == np - 1) ? 0.5 : 1.0;
        for (int ix = 0; ix < nx; ++ix) {
            double wx = (ix == 0 || ix == nx - 1) ? 0.5 : 1.0;
            acc += wp * wx * g.w(ip, ix);
        }
    }
    return acc * dx * dp;
}

} // namespace dopo
