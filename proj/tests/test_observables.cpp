#include "doctest.h"

#include "dopo/errors.hpp"
#include "dopo/fock.hpp"
#include "dopo/observables.hpp"
#include "dopo/output.hpp"
#include "dopo/wigner.hpp"

#include <cmath>
#include <cstdio>

using namespace dopo;

namespace {

const double kTwoPi = 2.0 * M_PI;

// Displacement-and-parity evaluation, the defining formula:
// W(x, p) = (1/2pi) Tr{rho D(beta) P D+(beta)}, beta = (x + i p)/2.
double wigner_oracle(const Mat& rho, double x, double p) {
    const int dim = static_cast<int>(rho.rows());
    const Mat d = displacement_op(dim, 0.5 * cxd(x, p));
    Mat parity = Mat::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) parity(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return ((rho * d * parity * d.adjoint()).trace()).real() / kTwoPi;
}

Mat gaussian_fock_state(int dim, cxd alpha, cxd xi, double nbar) {
    const Mat d = displacement_op(dim, alpha);
    const Mat s = squeeze_op(dim, xi);
    return d * s * thermal_state(dim, nbar) * s.adjoint() * d.adjoint();
}

} // namespace

TEST_CASE("second-order coherence oracles") {
    const Mat coh = projector(coherent_state(40, 1.0));
    CHECK(g2(coh) == doctest::Approx(1.0).epsilon(1e-6));

    const Mat one = projector(fock_state(6, 1));
    CHECK(g2(one) == doctest::Approx(0.0));

    const Mat th = thermal_state(80, 0.5);
    CHECK(g2(th) == doctest::Approx(2.0).epsilon(1e-6));

    const Mat vac = projector(fock_state(4, 0));
    CHECK_THROWS_AS(g2(vac), const UndefinedObservableError&);

    // factorized form agrees on a Gaussian state
    const Mat g = gaussian_fock_state(60, cxd(0.6, -0.2), 0.2, 0.1);
    const ModeMoments mm = mode_moments(g);
    CHECK(g2(g) == doctest::Approx(g2_gaussian(mm.alpha, mm.m, mm.n)).epsilon(1e-6));
}

TEST_CASE("moments and quadratures") {
    const Mat vac = projector(fock_state(10, 0));
    const QuadratureVariances qv0 = quadrature_variances(vac);
    CHECK(qv0.var_x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(qv0.var_p == doctest::Approx(1.0).epsilon(1e-12));

    const double r = 0.3;
    const Mat sq = gaussian_fock_state(50, 0.0, r, 0.0);
    const QuadratureVariances qv = quadrature_variances(sq);
    CHECK(qv.var_x == doctest::Approx(std::exp(-2.0 * r)).epsilon(1e-8));
    CHECK(qv.var_p == doctest::Approx(std::exp(2.0 * r)).epsilon(1e-8));

    const Mat disp = gaussian_fock_state(40, cxd(0.5, 0.25), 0.0, 0.0);
    const ModeMoments mm = mode_moments(disp);
    CHECK(std::abs(mm.alpha - cxd(0.5, 0.25)) < 1e-9);
    CHECK(std::abs(mm.m) < 1e-9);  // central moments of a coherent state vanish
    CHECK(std::abs(mm.n) < 1e-9);
}

TEST_CASE("distances, eigenvalues, fidelity") {
    const Mat r0 = projector(fock_state(5, 0));
    const Mat r1 = projector(fock_state(5, 1));
    CHECK(trace_distance(r0, r1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(trace_distance(r0, r0) == doctest::Approx(0.0));

    Mat mix = 0.5 * r0 + 0.5 * r1;
    CHECK(trace_distance(r0, mix) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK(min_eigenvalue(mix) == doctest::Approx(0.0));
    Mat neg = mix;
    neg(2, 2) = -0.01;
    CHECK(min_eigenvalue(neg) == doctest::Approx(-0.01));

    const Vec c = coherent_state(30, cxd(0.4, 0.1));
    CHECK(overlap_fidelity(projector(c), c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("phase-space values against the displaced-parity formula") {
    const Mat vac = projector(fock_state(30, 0));
    CHECK(wigner_point(vac, 0.0, 0.0) == doctest::Approx(1.0 / kTwoPi).epsilon(1e-6));

    const Mat one = projector(fock_state(30, 1));
    CHECK(wigner_point(one, 0.0, 0.0) == doctest::Approx(-1.0 / kTwoPi).epsilon(1e-5));

    Mat rich = 0.6 * projector(coherent_state(40, cxd(0.8, 0.3)))
        + 0.4 * gaussian_fock_state(40, 0.0, cxd(0.3, -0.2), 0.15);
    rich /= rich.trace().real();
    for (double x : {0.0, 0.7, -1.3})
        for (double p : {0.0, -0.4, 0.9})
            CHECK(wigner_point(rich, x, p)
                  == doctest::Approx(wigner_oracle(rich, x, p)).epsilon(5e-7));
}

TEST_CASE("grid evaluation: parallel equals serial and matches points") {
    const Mat rho = gaussian_fock_state(35, cxd(0.4, 0.2), 0.25, 0.1);
    const RVec ax = RVec::LinSpaced(41, -4.0, 4.0);
    const WignerGrid a = wigner_from_rho(rho, ax, ax);
    const WignerGrid b = wigner_from_rho_serial(rho, ax, ax);
    CHECK((a.w - b.w).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(a.w.rows() == 41);
    CHECK(a.w.cols() == 41);
    CHECK(a.w(20, 20) == doctest::Approx(wigner_point(rho, 0.0, 0.0)).epsilon(1e-12));
    CHECK(a.w(13, 29) == doctest::Approx(wigner_point(rho, ax(29), ax(13))).epsilon(1e-12));
}

TEST_CASE("closed Gaussian form against the Fock-basis evaluation") {
    const cxd alpha(0.5, -0.3);
    const cxd xi(0.35, 0.15);
    const Mat rho = gaussian_fock_state(70, alpha, xi, 0.2);
    const ModeMoments mm = mode_moments(rho);
    const RVec ax = RVec::LinSpaced(31, -4.5, 4.5);
    const WignerGrid num = wigner_from_rho(rho, ax, ax);
    const WignerGrid ana = wigner_from_gaussian(mm.alpha, mm.m, mm.n, ax, ax);
    CHECK((num.w - ana.w).cwiseAbs().maxCoeff() < 1e-6);

    // a half-half mixture doubles up linearly
    const std::vector<GaussianComponent> parts{{0.5, mm.alpha, mm.m, mm.n},
                                               {0.5, -mm.alpha, mm.m, mm.n}};
    const WignerGrid mix = wigner_from_gaussian_mixture(parts, ax, ax);
    const WignerGrid flip = wigner_from_gaussian(-mm.alpha, mm.m, mm.n, ax, ax);
    CHECK((mix.w - 0.5 * (ana.w + flip.w)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grid moments close against operator expectations") {
    const Mat rho = gaussian_fock_state(60, cxd(0.5, 0.3), 0.25, 0.1);
    const RVec ax = default_axis(rho);
    const WignerGrid g = wigner_from_rho(rho, ax, ax);
    CHECK(grid_integral(g) == doctest::Approx(1.0).epsilon(1e-4));

    const double dx = g.x(1) - g.x(0);
    const double dp = g.p(1) - g.p(0);
    double mx = 0.0, mx2 = 0.0;
    for (int ip = 0; ip < g.p.size(); ++ip)
        for (int ix = 0; ix < g.x.size(); ++ix) {
            mx += g.x(ix) * g.w(ip, ix) * dx * dp;
            mx2 += g.x(ix) * g.x(ix) * g.w(ip, ix) * dx * dp;
        }
    const ModeMoments mm = mode_moments(rho);
    const QuadratureVariances qv = quadrature_variances(rho);
    const double x_mean = 2.0 * mm.alpha.real();
    CHECK(mx == doctest::Approx(x_mean).epsilon(1e-3));
    CHECK(mx2 == doctest::Approx(qv.var_x + x_mean * x_mean).epsilon(1e-3));
}

TEST_CASE("binary phase-space file round-trips") {
    const Mat rho = gaussian_fock_state(25, cxd(0.3, 0.1), 0.2, 0.0);
    const RVec ax = RVec::LinSpaced(21, -3.0, 3.0);
    const WignerGrid g = wigner_from_rho(rho, ax, ax);
    const char* path = "wigner_roundtrip_test.bin";
    write_wigner_binary(path, g);
    const WignerGrid back = read_wigner_binary(path);
    std::remove(path);
    CHECK((back.x - g.x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.p - g.p).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.w - g.w).cwiseAbs().maxCoeff() == 0.0);
}
