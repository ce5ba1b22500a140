#include "dopo/liouville.hpp"
#include "dopo/errors.hpp"
#include "dopo/fock.hpp"

#include <Eigen/SparseLU>
#include <cmath>

namespace dopo {

Vec vec_of(const Mat& m) {
    return Eigen::Map<const Vec>(m.data(), m.size());
}

Mat unvec(const Vec& v, int dim) {
    if (v.size() != Eigen::Index(dim) * dim) throw DimensionError("unvec: size mismatch");
    return Eigen::Map<const Mat>(v.data(), dim, dim);
}

SpMat commutator_superop(const SpMat& G) {
    const int d = int(G.rows());
    SpMat id = identity_op(d);
    SpMat Gt = SpMat(G.transpose());
    return kron(id, G) - kron(Gt, id);
}

SpMat dissipator_superop(const SpMat& b) {
    const int d = int(b.rows());
    SpMat id = identity_op(d);
    SpMat bc = b.conjugate();
    SpMat bdb = SpMat(b.adjoint()) * b;
    SpMat bdbT = SpMat(bdb.transpose());
    return SpMat(2.0 * kron(bc, b)) - kron(id, bdb) - kron(bdbT, id);
}

SpMat build_liouvillian(const std::vector<std::pair<cxd, SpMat>>& hamiltonian_terms,
                        const std::vector<std::pair<double, SpMat>>& dissipators) {
    if (hamiltonian_terms.empty() && dissipators.empty())
        throw DimensionError("build_liouvillian: no terms");
    int d = hamiltonian_terms.empty() ? int(dissipators.front().second.rows())
                                      : int(hamiltonian_terms.front().second.rows());
    SpMat L(d * d, d * d);
    for (const auto& [c, G] : hamiltonian_terms) {
        if (G.rows() != d) throw DimensionError("build_liouvillian: mixed dimensions");
        L += SpMat(c * commutator_superop(G));
    }
    for (const auto& [rate, b] : dissipators) {
        if (b.rows() != d) throw DimensionError("build_liouvillian: mixed dimensions");
        L += SpMat(rate * dissipator_superop(b));
    }
    L.makeCompressed();
    return L;
}

double norm_scale(const SpMat& L) {
    double best = 0.0;
    for (int k = 0; k < L.outerSize(); ++k) {
        double col = 0.0;
        for (SpMat::InnerIterator it(L, k); it; ++it) col += std::abs(it.value());
        best = std::max(best, col);
    }
    return best > 0 ? best : 1.0;
}

namespace {

using LU = Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>;

// Remove the kernel direction from y: subtract steady * (trace functional of y).
// vec(1)^T is the left null vector, so this is an oblique projector.
void deflate(Vec& y, const Vec& steady, int dim) {
    cxd tr_y = 0.0, tr_s = 0.0;
    for (int i = 0; i < dim; ++i) {
        tr_y += y(Eigen::Index(i) * dim + i);
        tr_s += steady(Eigen::Index(i) * dim + i);
    }
    y -= (tr_y / tr_s) * steady;
}

double gap_from_lu(const LU& lu, const Vec& steady, int dim, double shift) {
    // Deflated inverse iteration: growth rate tends to 1/|lambda_2 - shift|.
    const Eigen::Index n = steady.size();
    Vec y(n);
    // Deterministic pseudo-random start, full support.
    for (Eigen::Index i = 0; i < n; ++i) {
        double ph = 0.37 + 0.618033988749895 * double(i % 1013);
        y(i) = cxd(std::cos(6.2831853 * ph), std::sin(6.2831853 * ph * 0.7));
    }
    deflate(y, steady, dim);
    y /= y.norm();
    double rate = 0.0, prev = -1.0;
    for (int it = 0; it < 25; ++it) {
        Vec z = lu.solve(y);
        deflate(z, steady, dim);
        rate = z.norm();
        if (rate <= 0) break;
        y = z / rate;
        if (prev > 0 && std::abs(rate - prev) < 1e-3 * rate) break;
        prev = rate;
    }
    if (rate <= 0) return 0.0;
    double dist = 1.0 / rate;  // |lambda_2 - shift|
    return std::max(0.0, dist - shift);
}

SteadyResult steady_dense(const SpMat& L, int dim, const SteadyOptions& opt) {
    Mat Ld = Mat(L);
    Eigen::ComplexEigenSolver<Mat> es(Ld);
    if (es.info() != Eigen::Success) throw SolverError("dense eigensolver failed");
    const auto& ev = es.eigenvalues();
    Eigen::Index i0 = 0, i1 = -1;
    for (Eigen::Index i = 1; i < ev.size(); ++i)
        if (std::abs(ev(i)) < std::abs(ev(i0))) i0 = i;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (i == i0) continue;
        if (i1 < 0 || std::abs(ev(i)) < std::abs(ev(i1))) i1 = i;
    }
    double gap = i1 >= 0 ? std::abs(ev(i1)) : 0.0;
    if (opt.check_unique && gap < opt.degeneracy_tol)
        throw DegenerateSteadyStateError("steady state not unique: |lambda_2| = " +
                                         std::to_string(gap));
    Vec x = es.eigenvectors().col(i0);
    Mat rho = hermitize(unvec(x, dim));
    cxd tr = rho.trace();
    if (std::abs(tr) < 1e-14) throw SolverError("steady candidate has zero trace");
    rho /= tr;
    double res = (L * vec_of(rho)).norm() / norm_scale(L);
    return {rho, res, gap};
}

} // namespace

SteadyResult steady_state(const SpMat& L, int dim, const SteadyOptions& opt) {
    if (L.rows() != Eigen::Index(dim) * dim) throw DimensionError("steady_state: L vs dim mismatch");
    const Eigen::Index n = L.rows();
    if (n <= 4096) return steady_dense(L, dim, opt);

    const double scale = norm_scale(L);
    const double shift = opt.shift_rel * scale;
    SpMat A = L;
    for (int i = 0; i < n; ++i) A.coeffRef(i, i) -= shift;
    A.makeCompressed();
    LU lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");

    Vec x;
    if (opt.guess.size() == n) x = opt.guess;
    else {
        Mat seed = Mat::Identity(dim, dim) / double(dim);
        x = vec_of(seed);
    }
    x /= x.norm();
    double res = 1.0;
    for (int it = 0; it < 8; ++it) {
        Vec z = lu.solve(x);
        double zn = z.norm();
        if (!(zn > 0) || !std::isfinite(zn)) throw SolverError("inverse iteration breakdown");
        x = z / zn;
        res = (L * x).norm() / scale;
        if (res <= opt.residual_rel) break;
    }
    Mat rho = hermitize(unvec(x, dim));
    cxd tr = rho.trace();
    if (std::abs(tr) < 1e-12) throw SolverError("steady candidate has vanishing trace");
    rho /= tr;
    res = (L * vec_of(rho)).norm() / scale;
    if (res > opt.residual_rel)
        throw SolverError("steady state residual " + std::to_string(res) + " above tolerance");

    double gap = 0.0;
    if (opt.check_unique) {
        gap = gap_from_lu(lu, vec_of(rho), dim, shift);
        if (gap < opt.degeneracy_tol)
            throw DegenerateSteadyStateError("steady state not unique: |lambda_2| = " +
                                             std::to_string(gap));
    }
    return {rho, res, gap};
}

double spectral_gap(const SpMat& L, const Vec& steady_vec, double shift_rel) {
    const int dim = int(std::lround(std::sqrt(double(L.rows()))));
    const double shift = shift_rel * norm_scale(L);
    SpMat A = L;
    for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) -= shift;
    A.makeCompressed();
    LU lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
    return gap_from_lu(lu, steady_vec, dim, shift);
}

namespace {

std::vector<Mat> evolve_impl(const Rhs& rhs, const Mat& rho0, const std::vector<double>& t_grid,
                             const EvolveConfig& cfg, int dim) {
    Vec y = vec_of(rho0);
    std::vector<Mat> out;
    out.reserve(t_grid.size());
    double t = 0.0;
    for (double tg : t_grid) {
        if (tg < t - 1e-12) throw DimensionError("evolve: time grid must be nondecreasing");
        if (tg > t) { integrate_to(rhs, y, t, tg, cfg); t = tg; }
        Mat rho = hermitize(unvec(y, dim));
        double drift = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
        if (drift > 1e-8)
            throw SolverError("trace drift " + std::to_string(drift) + " exceeds 1e-8");
        out.push_back(rho / rho.trace());
    }
    return out;
}

} // namespace

std::vector<Mat> evolve(const SpMat& L, const Mat& rho0, const std::vector<double>& t_grid,
                        const EvolveConfig& cfg) {
    const int dim = int(rho0.rows());
    if (L.rows() != Eigen::Index(dim) * dim) throw DimensionError("evolve: L vs rho mismatch");
    Rhs rhs = [&L](double, const Vec& y, Vec& dy) { dy.noalias() = L * y; };
    return evolve_impl(rhs, rho0, t_grid, cfg, dim);
}

std::vector<Mat> evolve_scalar_driven(const SpMat& L0, const SpMat& B, const SpMat& Bc,
                                      const std::function<cxd(double)>& f, const Mat& rho0,
                                      const std::vector<double>& t_grid,
                                      const EvolveConfig& cfg) {
    const int dim = int(rho0.rows());
    if (L0.rows() != Eigen::Index(dim) * dim) throw DimensionError("evolve: L vs rho mismatch");
    Vec tmp(L0.rows());
    Rhs rhs = [&](double t, const Vec& y, Vec& dy) {
        cxd c = f(t);
        dy.noalias() = L0 * y;
        tmp.noalias() = B * y;
        dy += c * tmp;
        tmp.noalias() = Bc * y;
        dy += std::conj(c) * tmp;
    };
    return evolve_impl(rhs, rho0, t_grid, cfg, dim);
}

} // namespace dopo
