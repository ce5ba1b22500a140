#include "doctest.h"

#include "dopo/classical.hpp"
#include "dopo/observables.hpp"

#include <cmath>
#include <vector>

using namespace dopo;

TEST_CASE("parameter translation") {
    const DopoParams p = params_from_sigma(1.0, 1.0, 0.1, 1.0);
    CHECK(p.eps_p == doctest::Approx(10.0));
    CHECK(p.sigma() == doctest::Approx(1.0));
    CHECK(p.g_squared() == doctest::Approx(0.01));
    const DopoParams q = params_from_eps(2.0, 0.5, 0.2, 5.0);
    CHECK(q.sigma() == doctest::Approx(0.2 * 5.0 / (2.0 * 0.5)));
}

TEST_CASE("fixed points below and above threshold") {
    const DopoParams below = params_from_sigma(1.0, 1.0, 1.0, 0.5);
    const auto fb = classical_fixed_points(below);
    REQUIRE(fb.size() == 1);
    CHECK(fb[0].branch == "below");
    CHECK(fb[0].stable);
    CHECK(std::abs(fb[0].alpha_p - cxd(0.5, 0.0)) < 1e-12);
    CHECK(std::abs(fb[0].alpha_s) < 1e-12);

    const DopoParams above = params_from_sigma(1.0, 1.0, 1.0, 2.0);
    const auto fa = classical_fixed_points(above);
    REQUIRE(fa.size() == 3);
    // pump clamps at gamma_s/chi = 1; signal amplitude = sqrt(2(eps - 1))
    bool saw_plus = false, saw_minus = false;
    for (const auto& f : fa) {
        if (f.branch == "below") {
            CHECK(!f.stable);
            continue;
        }
        CHECK(f.stable);
        CHECK(std::abs(f.alpha_p - cxd(1.0, 0.0)) < 1e-10);
        CHECK(std::abs(std::abs(f.alpha_s) - std::sqrt(2.0)) < 1e-10);
        if (f.branch == "above-plus") saw_plus = f.alpha_s.real() > 0;
        if (f.branch == "above-minus") saw_minus = f.alpha_s.real() < 0;
    }
    CHECK(saw_plus);
    CHECK(saw_minus);
}

TEST_CASE("jacobian growth rates change sign exactly at threshold") {
    for (double s : {0.9, 1.1}) {
        const DopoParams p = params_from_sigma(1.0, 2.0, 0.5, s);
        const auto fp = classical_fixed_points(p);
        const double top = fp[0].growth_rates.maxCoeff();
        if (s < 1.0)
            CHECK(top < 0.0);
        else
            CHECK(top > 0.0);
    }
}

TEST_CASE("classical transient settles onto the bright branch") {
    const DopoParams p = params_from_sigma(1.0, 1.0, 1.0, 2.0);
    std::vector<double> grid{0.0, 60.0};
    const auto traj = classical_dynamics(p, 0.0, cxd(0.01, 0.0), grid);
    CHECK(std::abs(traj.back().alpha_p - cxd(1.0, 0.0)) < 1e-6);
    CHECK(std::abs(traj.back().alpha_s - cxd(std::sqrt(2.0), 0.0)) < 1e-6);
}

TEST_CASE("factorized signal moments at mu = 0.5") {
    double n = 0.0;
    cxd m = 0.0;
    meanfield_signal_moments(1.0, cxd(0.5, 0.0), n, m);
    CHECK(n == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(m.real() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(m.imag() == doctest::Approx(0.0));

    // quadrature variances 1 + 2n ± 2 Re m = gamma/(gamma -+ mu)
    const QuadratureVariances qv = quadrature_variances(m, n);
    CHECK(qv.var_x == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(qv.var_p == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("self-consistent factorized steady state stays below the clamp") {
    for (double s : {0.5, 0.95, 1.0, 1.5, 3.0}) {
        const DopoParams p = params_from_sigma(1.0, 1.0, 0.4, s);
        const MeanfieldSteady mf = meanfield_steady(p);
        CHECK(mf.residual < 1e-10);
        CHECK(p.chi * std::abs(mf.alpha_p) < p.gamma_s);
        double n_ref = 0.0;
        cxd m_ref = 0.0;
        meanfield_signal_moments(p.gamma_s, p.chi * mf.alpha_p, n_ref, m_ref);
        CHECK(mf.n_s == doctest::Approx(n_ref).epsilon(1e-10));
        // pump equation closes: eps = gamma_p alpha_p + (chi/2) m_s
        const cxd close = p.gamma_p * mf.alpha_p + 0.5 * p.chi * mf.m_s;
        CHECK(std::abs(close - p.eps_p) < 1e-10 * std::max(1.0, p.eps_p));
    }
}

TEST_CASE("weak drive expansion of the factorized steady state") {
    // far below threshold: n_s ~ sigma^2/2 and the pump depletion is
    // -(chi/2) m_s / gamma_p with m_s ~ sigma/2
    const DopoParams p = params_from_sigma(1.0, 1.0, 0.1, 0.1);
    const MeanfieldSteady mf = meanfield_steady(p);
    CHECK(std::abs(mf.alpha_p - cxd(1.0 - 0.1 * 0.05 / 2.0, 0.0)) < 2e-4);
    CHECK(std::abs(mf.n_s - 0.005) < 1e-4);
}

TEST_CASE("factorized dynamics relaxes to the self-consistent point") {
    const DopoParams p = params_from_sigma(1.0, 1.0, 0.5, 0.8);
    const MeanfieldSteady mf = meanfield_steady(p);
    const std::vector<double> grid{0.0, 40.0};
    const auto traj = meanfield_dynamics(p, 0.0, 0.0, 0.0, grid);
    CHECK(std::abs(traj.back().alpha_p - mf.alpha_p) < 1e-6);
    CHECK(std::abs(traj.back().m_s - mf.m_s) < 1e-6);
    CHECK(traj.back().n_s == doctest::Approx(mf.n_s).epsilon(1e-5));
}
