#include "doctest.h"

#include "dopo/fock.hpp"

#include <cmath>

using namespace dopo;

TEST_CASE("ladder operators on a small space") {
    const SpMat a = annihilation(3);
    const SpMat ad = creation(3);
    CHECK(Mat(a)(0, 1) == cxd(1.0, 0.0));
    CHECK(std::abs(Mat(a)(1, 2) - cxd(std::sqrt(2.0), 0.0)) < 1e-15);
    CHECK(Mat(ad).isApprox(Mat(a).adjoint()));

    const Mat n = Mat(number_op(3));
    for (int k = 0; k < 3; ++k) CHECK(n(k, k) == cxd(k, 0.0));
}

TEST_CASE("truncated commutator artifact sits in the top corner") {
    const int dim = 10;
    const Mat c = Mat(annihilation(dim)) * Mat(creation(dim))
        - Mat(creation(dim)) * Mat(annihilation(dim));
    // [a, a+] = 1 except the last diagonal entry, which absorbs the cutoff
    for (int k = 0; k + 1 < dim; ++k) CHECK(std::abs(c(k, k) - cxd(1.0, 0.0)) < 1e-13);
    CHECK(std::abs(c(dim - 1, dim - 1) - cxd(1.0 - dim, 0.0)) < 1e-12);
}

TEST_CASE("states") {
    const Vec v0 = fock_state(5, 0);
    CHECK(std::abs(v0(0) - 1.0) < 1e-15);

    const Vec c = coherent_state(30, 1.0);
    CHECK(std::abs(c.squaredNorm() - 1.0) < 1e-10);
    CHECK(std::abs(expval(annihilation(30), projector(c)) - 1.0) < 1e-10);

    const Mat th = thermal_state(60, 0.5);
    CHECK(std::abs(th.trace().real() - 1.0) < 1e-12);
    CHECK(std::abs(expval(number_op(60), th) - 0.5) < 1e-10);
}

TEST_CASE("displacement and squeeze are unitary and move the right moments") {
    const int dim = 40;
    const Mat d = displacement_op(dim, cxd(0.7, -0.2));
    CHECK((d * d.adjoint() - Mat::Identity(dim, dim)).norm() < 1e-8);

    const Mat rho = d * projector(fock_state(dim, 0)) * d.adjoint();
    CHECK(std::abs(expval(annihilation(dim), rho) - cxd(0.7, -0.2)) < 1e-9);

    const double r = 0.4;
    const Mat s = squeeze_op(dim, r);
    const Mat sv = s * projector(fock_state(dim, 0)) * s.adjoint();
    const double n = expval(number_op(dim), sv).real();
    CHECK(std::abs(n - std::sinh(r) * std::sinh(r)) < 1e-10);
}

TEST_CASE("two-photon dissipator on |2><2|") {
    const int dim = 5;
    const SpMat a2 = SpMat(annihilation(dim) * annihilation(dim));
    const Mat rho = Mat(projector(fock_state(dim, 2)));
    const Mat d = dissipator_apply(a2, rho);
    // a^2|2> = sqrt(2)|0>; with the factor-2 jump the population moves at rate 4
    CHECK(std::abs(d(0, 0) - cxd(4.0, 0.0)) < 1e-13);
    CHECK(std::abs(d(2, 2) - cxd(-4.0, 0.0)) < 1e-13);
    CHECK(std::abs(d.trace()) < 1e-13);
}

TEST_CASE("composite ordering: pump index is the slow one") {
    const int dp = 3, ds = 4;
    const SpMat ap = lift_pump(annihilation(dp), ds);
    const SpMat as = lift_signal(annihilation(ds), dp);
    // states factorize as |p> kron |s>, composite row p*ds + s
    Vec v = Vec::Zero(dp * ds);
    v(1 * ds + 2) = 1.0;  // |p=1, s=2>
    const Vec wp = Mat(ap) * v;
    CHECK(std::abs(wp(0 * ds + 2) - cxd(1.0, 0.0)) < 1e-15);
    const Vec ws = Mat(as) * v;
    CHECK(std::abs(ws(1 * ds + 1) - cxd(std::sqrt(2.0), 0.0)) < 1e-15);

    const Mat mixed = Mat(kron(annihilation(dp), creation(ds)));
    const Mat byhand = Mat(ap) * Mat(lift_signal(creation(ds), dp));
    CHECK(mixed.isApprox(byhand, 1e-14));
}

TEST_CASE("partial traces undo a product state") {
    const int dp = 4, ds = 6;
    const Mat rp = thermal_state(dp, 0.3);
    const Mat rs = projector(coherent_state(ds, 0.6));
    Mat joint = Mat::Zero(dp * ds, dp * ds);
    for (int p1 = 0; p1 < dp; ++p1)
        for (int p2 = 0; p2 < dp; ++p2)
            for (int s1 = 0; s1 < ds; ++s1)
                for (int s2 = 0; s2 < ds; ++s2)
                    joint(p1 * ds + s1, p2 * ds + s2) = rp(p1, p2) * rs(s1, s2);

    CHECK((partial_trace_signal(joint, dp, ds) - rp).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((partial_trace_pump(joint, dp, ds) - rs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hermitize symmetrizes and keeps the real trace") {
    Mat m(2, 2);
    m << cxd(1.0, 0.3), cxd(0.5, 0.0), cxd(0.1, 0.0), cxd(2.0, -0.3);
    const Mat h = hermitize(m);
    CHECK((h - h.adjoint()).norm() < 1e-15);
    CHECK(std::abs(h.trace() - cxd(3.0, 0.0)) < 1e-15);
}
