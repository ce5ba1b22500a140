#include "dopo/fock.hpp"
#include "dopo/errors.hpp"

#include <cmath>
#include <vector>
#include <unsupported/Eigen/MatrixFunctions>

namespace dopo {

static void check_dim(int dim) {
    if (dim < 1) throw DimensionError("Fock dimension must be >= 1, got " + std::to_string(dim));
}

SpMat annihilation(int dim) {
    check_dim(dim);
    SpMat a(dim, dim);
    std::vector<Triplet> t;
    t.reserve(dim);
    for (int n = 1; n < dim; ++n) t.emplace_back(n - 1, n, std::sqrt(double(n)));
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

SpMat creation(int dim) {
    return SpMat(annihilation(dim).adjoint());
}

SpMat number_op(int dim) {
    check_dim(dim);
    SpMat n(dim, dim);
    std::vector<Triplet> t;
    for (int k = 1; k < dim; ++k) t.emplace_back(k, k, double(k));
    n.setFromTriplets(t.begin(), t.end());
    return n;
}

SpMat identity_op(int dim) {
    check_dim(dim);
    SpMat id(dim, dim);
    id.setIdentity();
    return id;
}

SpMat kron(const SpMat& P, const SpMat& S) {
    const int dp = int(P.rows()), ds = int(S.rows());
    if (P.cols() != dp || S.cols() != ds) throw DimensionError("kron expects square factors");
    SpMat K(dp * ds, dp * ds);
    std::vector<Triplet> t;
    t.reserve(size_t(P.nonZeros()) * size_t(S.nonZeros()));
    for (int kp = 0; kp < P.outerSize(); ++kp)
        for (SpMat::InnerIterator ip(P, kp); ip; ++ip)
            for (int ks = 0; ks < S.outerSize(); ++ks)
                for (SpMat::InnerIterator is(S, ks); is; ++is)
                    t.emplace_back(int(ip.row()) * ds + int(is.row()),
                                   int(ip.col()) * ds + int(is.col()),
                                   ip.value() * is.value());
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

SpMat lift_pump(const SpMat& op, int dim_s) { return kron(op, identity_op(dim_s)); }
SpMat lift_signal(const SpMat& op, int dim_p) { return kron(identity_op(dim_p), op); }

Vec fock_state(int dim, int n) {
    check_dim(dim);
    if (n < 0 || n >= dim) throw DimensionError("Fock level outside truncation");
    Vec v = Vec::Zero(dim);
    v(n) = 1.0;
    return v;
}

Vec coherent_state(int dim, cxd alpha) {
    check_dim(dim);
    Vec v(dim);
    // c_{n+1} = c_n * alpha / sqrt(n+1), normalized over the truncated space so
    // the state stays a unit vector even when |alpha|^2 presses the cutoff.
    v(0) = 1.0;
    for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(double(n));
    v /= v.norm();
    return v;
}

Mat thermal_state(int dim, double nbar) {
    check_dim(dim);
    if (nbar < 0) throw DimensionError("thermal occupation must be >= 0");
    Mat rho = Mat::Zero(dim, dim);
    if (nbar == 0.0) { rho(0, 0) = 1.0; return rho; }
    const double q = nbar / (nbar + 1.0);
    double p = 1.0, sum = 0.0;
    for (int n = 0; n < dim; ++n) { rho(n, n) = p; sum += p; p *= q; }
    rho /= sum;
    return rho;
}

Mat projector(const Vec& psi) { return psi * psi.adjoint(); }

Mat displacement_op(int dim, cxd beta) {
    const Mat ad = Mat(creation(dim));
    Mat g = beta * ad - std::conj(beta) * ad.adjoint();
    return g.exp();
}

Mat squeeze_op(int dim, cxd xi) {
    const Mat a = Mat(annihilation(dim));
    Mat g = 0.5 * (std::conj(xi) * a * a - xi * (a.adjoint() * a.adjoint()));
    return g.exp();
}

Mat dissipator_apply(const SpMat& b, const Mat& rho) {
    if (b.rows() != rho.rows()) throw DimensionError("dissipator_apply: size mismatch");
    SpMat bdb = SpMat(b.adjoint()) * b;
    Mat out = 2.0 * (b * rho * SpMat(b.adjoint()));
    out.noalias() -= bdb * rho;
    out.noalias() -= rho * bdb;
    return out;
}

Mat partial_trace_signal(const Mat& rho, int dim_p, int dim_s) {
    if (rho.rows() != dim_p * dim_s || rho.cols() != dim_p * dim_s)
        throw DimensionError("partial_trace_signal: size mismatch");
    Mat out = Mat::Zero(dim_p, dim_p);
    for (int i = 0; i < dim_p; ++i)
        for (int j = 0; j < dim_p; ++j) {
            cxd acc = 0.0;
            for (int k = 0; k < dim_s; ++k) acc += rho(i * dim_s + k, j * dim_s + k);
            out(i, j) = acc;
        }
    return out;
}

Mat partial_trace_pump(const Mat& rho, int dim_p, int dim_s) {
    if (rho.rows() != dim_p * dim_s || rho.cols() != dim_p * dim_s)
        throw DimensionError("partial_trace_pump: size mismatch");
    Mat out = Mat::Zero(dim_s, dim_s);
    for (int m = 0; m < dim_s; ++m)
        for (int n = 0; n < dim_s; ++n) {
            cxd acc = 0.0;
            for (int i = 0; i < dim_p; ++i) acc += rho(i * dim_s + m, i * dim_s + n);
            out(m, n) = acc;
        }
    return out;
}

cxd expval(const SpMat& A, const Mat& rho) {
    if (A.rows() != rho.rows()) throw DimensionError("expval: size mismatch");
    cxd acc = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
            acc += it.value() * rho(it.col(), it.row());
    return acc;
}

Mat hermitize(const Mat& rho) { return 0.5 * (rho + rho.adjoint()); }

} // namespace dopo
