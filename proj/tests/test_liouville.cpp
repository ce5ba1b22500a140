#include "doctest.h"

#include "dopo/fock.hpp"
#include "dopo/liouville.hpp"
#include "dopo/observables.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace dopo;

TEST_CASE("vec round trip and the product identity") {
    const int dim = 4;
    Mat rho(dim, dim), A(dim, dim), B(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            rho(i, j) = cxd(0.1 * i + 0.01 * j, 0.02 * (i - j));
            A(i, j) = cxd(std::sin(1.0 + i * j), 0.3 * i);
            B(i, j) = cxd(0.2 * j, std::cos(2.0 + i + j));
        }
    CHECK((unvec(vec_of(rho), dim) - rho).norm() < 1e-15);

    const SpMat As = A.sparseView();
    const SpMat Bt = Mat(B.transpose()).sparseView();
    const Vec lhs = kron(Bt, As) * vec_of(rho);
    const Vec rhs = vec_of(A * rho * B);
    CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("commutator and dissipator superoperators act like the dense forms") {
    const int dim = 6;
    const SpMat a = annihilation(dim);
    const SpMat g = SpMat(creation(dim) * creation(dim));
    Mat rho = thermal_state(dim, 0.4);
    rho(1, 3) = cxd(0.05, 0.02);
    rho(3, 1) = std::conj(rho(1, 3));

    const Mat c1 = unvec(commutator_superop(g) * vec_of(rho), dim);
    const Mat c2 = Mat(g) * rho - rho * Mat(g);
    CHECK((c1 - c2).norm() < 1e-13);

    const Mat d1 = unvec(dissipator_superop(a) * vec_of(rho), dim);
    const Mat d2 = dissipator_apply(a, rho);
    CHECK((d1 - d2).norm() < 1e-13);
}

TEST_CASE("every Liouvillian annihilates the trace functional") {
    const int dim = 8;
    const SpMat a = annihilation(dim);
    const SpMat drive = SpMat(creation(dim) - annihilation(dim));
    const SpMat L = build_liouvillian({{cxd(0.3, 0.0), drive}}, {{1.0, a}});
    const Vec tr_vec = vec_of(Mat::Identity(dim, dim));
    CHECK((SpMat(L.transpose()) * tr_vec).norm() < 1e-12 * norm_scale(L));
}

TEST_CASE("driven-damped mode relaxes to the known coherent state") {
    // d rho/dt = [eps(a+ - a), rho] + gamma D[a]; steady state |alpha> with
    // alpha = eps/gamma
    const int dim = 25;
    const double eps = 0.3, gamma = 1.0;
    const SpMat drive = SpMat(creation(dim) - annihilation(dim));
    const SpMat L = build_liouvillian({{cxd(eps, 0.0), drive}}, {{gamma, annihilation(dim)}});

    const SteadyResult st = steady_state(L, dim);
    CHECK(st.residual < 1e-8);
    CHECK(std::abs(st.rho.trace() - cxd(1.0, 0.0)) < 1e-10);
    CHECK(std::abs(expval(annihilation(dim), st.rho) - cxd(eps / gamma, 0.0)) < 1e-6);
    const Vec target = coherent_state(dim, eps / gamma);
    CHECK(overlap_fidelity(st.rho, target) > 1.0 - 1e-8);
    CHECK(st.gap > 0.1);
}

TEST_CASE("free decay matches the exponential law") {
    const int dim = 12;
    const SpMat L = build_liouvillian({}, {{1.0, annihilation(dim)}});
    const Mat rho0 = projector(coherent_state(dim, 1.2));
    const std::vector<double> grid{0.0, 0.5, 1.0};
    const auto traj = evolve(L, rho0, grid);
    const double n0 = photon_number(traj[0]);
    // <n>(t) = <n>(0) exp(-2 gamma t) under the factor-2 jump convention
    CHECK(std::abs(photon_number(traj[1]) - n0 * std::exp(-1.0)) < 1e-7);
    CHECK(std::abs(photon_number(traj[2]) - n0 * std::exp(-2.0)) < 1e-7);
    for (const Mat& r : traj) CHECK(std::abs(r.trace() - cxd(1.0, 0.0)) < 1e-8);
}

TEST_CASE("scalar-driven evolution reproduces a constant-coefficient flow") {
    const int dim = 16;
    const double eps = 0.25;
    const SpMat drive = SpMat(creation(dim) - annihilation(dim));
    const SpMat L_full =
        build_liouvillian({{cxd(eps, 0.0), drive}}, {{1.0, annihilation(dim)}});
    const SpMat L0 = build_liouvillian({}, {{1.0, annihilation(dim)}});
    const SpMat B = commutator_superop(creation(dim));
    const SpMat Bc = SpMat(-commutator_superop(annihilation(dim)));

    const Mat rho0 = projector(fock_state(dim, 0));
    const std::vector<double> grid{0.0, 0.7, 1.4};
    const auto ref = evolve(L_full, rho0, grid);
    const auto drv = evolve_scalar_driven(L0, B, Bc, [&](double) { return cxd(eps, 0.0); },
                                          rho0, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK((ref[k] - drv[k]).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("spectral gap of pure decay") {
    const int dim = 10;
    const double gamma = 0.7;
    const SpMat L = build_liouvillian({}, {{gamma, annihilation(dim)}});
    const SteadyResult st = steady_state(L, dim);
    // slowest modes are the one-photon coherences at gamma
    CHECK(st.gap == doctest::Approx(gamma).epsilon(1e-4));
}
