#include "dopo/gaussian.hpp"

#include "dopo/errors.hpp"
#include "dopo/observables.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace dopo {

namespace {

using RealFn = std::function<void(const RVec&, RVec&)>;

struct NewtonReport {
    bool converged = false;
    double residual = 0.0;
    int iterations = 0;
};

// Damped Newton with a finite-difference Jacobian and backtracking on the
// residual norm. Systems here have at most 32 unknowns, dense LU per step.
NewtonReport newton_solve(const RealFn& fun, RVec& x, double tol, int max_iter = 80) {
    const int n = static_cast<int>(x.size());
    const double root_n = std::sqrt(static_cast<double>(n));
    RVec f(n), ft(n), fp(n), xp(n), xt(n);
    Eigen::MatrixXd jac(n, n);
    auto rms = [&](const RVec& v) { return v.norm() / root_n; };
    fun(x, f);
    double nf = rms(f);
    NewtonReport rep;
    for (rep.iterations = 0; rep.iterations < max_iter && nf > tol; ++rep.iterations) {
        for (int j = 0; j < n; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(x(j)));
            xp = x;
            xp(j) += h;
            fun(xp, fp);
            jac.col(j) = (fp - f) / h;
        }
        const RVec dx = jac.partialPivLu().solve(-f);
        if (!dx.allFinite()) break;
        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            xt = x + step * dx;
            fun(xt, ft);
            const double nt = rms(ft);
            if (std::isfinite(nt) && nt <= (1.0 - 1e-4 * step) * nf) {
                x = xt;
                f = ft;
                nf = nt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    rep.converged = nf <= tol;
    rep.residual = nf;
    return rep;
}

// Newton on a subset of components; frozen components stay exactly zero.
NewtonReport masked_newton(const RealFn& full, int dim, const std::vector<int>& active,
                           RVec& xfull, double tol) {
    const int na = static_cast<int>(active.size());
    RVec xa(na);
    for (int i = 0; i < na; ++i) xa(i) = xfull(active[i]);
    RealFn fn = [&](const RVec& a, RVec& fa) {
        RVec xf = RVec::Zero(dim), ff(dim);
        for (int i = 0; i < na; ++i) xf(active[i]) = a(i);
        full(xf, ff);
        fa.resize(na);
        for (int i = 0; i < na; ++i) fa(i) = ff(active[i]);
    };
    NewtonReport rep = newton_solve(fn, xa, tol);
    xfull.setZero();
    for (int i = 0; i < na; ++i) xfull(active[i]) = xa(i);
    return rep;
}

double newton_tol(const DopoParams& p, const RVec& x0) {
    const double n = static_cast<double>(std::max<Eigen::Index>(1, x0.size()));
    return 1e-11 * (p.gamma_s + p.gamma_p) * (1.0 + x0.norm() / std::sqrt(n));
}

void put(RVec& x, int i, cxd z) {
    x(i) = z.real();
    x(i + 1) = z.imag();
}

cxd get(const RVec& x, int i) { return {x(i), x(i + 1)}; }

// ---- two-mode Gaussian closure ---------------------------------------------

struct FullVars {
    cxd as, ap, ms, mp, u, w;  // u = <da_p da_s>, w = <da_p+ da_s>
    double ns = 0.0, np = 0.0;
};

constexpr int kFullDim = 14;

void pack_full(const FullVars& v, RVec& x) {
    x.resize(kFullDim);
    put(x, 0, v.as);
    put(x, 2, v.ap);
    put(x, 4, v.ms);
    x(6) = v.ns;
    put(x, 7, v.mp);
    x(9) = v.np;
    put(x, 10, v.u);
    put(x, 12, v.w);
}

FullVars unpack_full(const RVec& x) {
    FullVars v;
    v.as = get(x, 0);
    v.ap = get(x, 2);
    v.ms = get(x, 4);
    v.ns = x(6);
    v.mp = get(x, 7);
    v.np = x(9);
    v.u = get(x, 10);
    v.w = get(x, 12);
    return v;
}

// Coupled first and second moments of both modes, lab frame. On the
// symmetric manifold (as = u = w = 0) the signal block reduces to the
// mean-field equations and the pump fluctuations decay to vacuum.
void full_moment_rhs(const DopoParams& p, const FullVars& v, FullVars& d) {
    const double gs = p.gamma_s, gp = p.gamma_p, x = p.chi;
    const cxd asc = std::conj(v.as);
    d.as = x * (v.ap * asc + std::conj(v.w)) - gs * v.as;
    d.ap = p.eps_p - 0.5 * x * (v.as * v.as + v.ms) - gp * v.ap;
    d.ms = x * v.ap * (2.0 * v.ns + 1.0) + 2.0 * x * asc * v.u - 2.0 * gs * v.ms;
    d.ns = 2.0 * x * std::real(v.ap * std::conj(v.ms)) + 2.0 * x * std::real(v.as * v.w)
         - 2.0 * gs * v.ns;
    d.mp = -2.0 * x * v.as * v.u - 2.0 * gp * v.mp;
    d.np = -2.0 * x * std::real(v.as * v.w) - 2.0 * gp * v.np;
    d.u = x * (v.ap * std::conj(v.w) - v.as * v.ms + asc * v.mp) - (gp + gs) * v.u;
    d.w = x * (v.ap * std::conj(v.u) + asc * (v.np - v.ns)) - (gp + gs) * v.w;
}

RealFn full_fn(const DopoParams& par) {
    return [par](const RVec& xx, RVec& ff) {
        FullVars d;
        full_moment_rhs(par, unpack_full(xx), d);
        pack_full(d, ff);
    };
}

const std::vector<int>& full_bt_active() {
    static const std::vector<int> idx{2, 3, 4, 5, 6, 7, 8, 9};
    return idx;
}

std::vector<int> index_range(int n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

GaussianBranch branch_from_full(const FullVars& v, const NewtonReport& rep,
                                const char* name) {
    GaussianBranch br;
    br.method = GaussianMethod::gsa_full;
    br.branch = name;
    br.alpha_s = v.as;
    br.alpha_p = v.ap;
    br.n_s = v.ns;
    br.n_p = v.np;
    br.m_s = v.ms;
    br.m_p = v.mp;
    br.residual = rep.residual;
    br.converged = rep.converged && gaussian_physical(v.ns, v.ms)
                && gaussian_physical(v.np, v.mp);
    return br;
}

// ---- reduced signal/pump closure -------------------------------------------

struct CmVars {
    cxd A1, A2;                // full signal <a>, <a^2>
    double N = 0.0;            // full signal <a+ a>
    std::array<cxd, 5> th{};   // h traces against a, a+, a^2, a+^2, a+a
    cxd ap, mp;                // pump frame amplitude, central <da^2>
    double np = 0.0;
    std::array<cxd, 3> Ta{}, Tad{};
};

constexpr int kCmDim = 32;

void pack_cm(const CmVars& v, RVec& x) {
    x.resize(kCmDim);
    put(x, 0, v.A1);
    put(x, 2, v.A2);
    x(4) = v.N;
    for (int k = 0; k < 5; ++k) put(x, 5 + 2 * k, v.th[k]);
    put(x, 15, v.ap);
    put(x, 17, v.mp);
    x(19) = v.np;
    for (int k = 0; k < 3; ++k) put(x, 20 + 2 * k, v.Ta[k]);
    for (int k = 0; k < 3; ++k) put(x, 26 + 2 * k, v.Tad[k]);
}

CmVars unpack_cm(const RVec& x) {
    CmVars v;
    v.A1 = get(x, 0);
    v.A2 = get(x, 2);
    v.N = x(4);
    for (int k = 0; k < 5; ++k) v.th[k] = get(x, 5 + 2 * k);
    v.ap = get(x, 15);
    v.mp = get(x, 17);
    v.np = x(19);
    for (int k = 0; k < 3; ++k) v.Ta[k] = get(x, 20 + 2 * k);
    for (int k = 0; k < 3; ++k) v.Tad[k] = get(x, 26 + 2 * k);
    return v;
}

// Gaussian closure of the reduced equations. Signal moments are full
// moments in the lab frame; the pump amplitude is relative to the fixed
// displacement `frame`, so the total gain is chi * (frame + ap).
void cm_rhs(const DopoParams& p, cxd frame, const CorrelationDecomposition& dec,
            const CmVars& v, CmVars& d) {
    const double gs = p.gamma_s, gp = p.gamma_p, x = p.chi;
    const double b = 0.25 * x * x;
    const cxd nu = p.eps_p - gp * frame;
    const cxd mu_f = x * frame;
    const cxd mu = x * (frame + v.ap);

    const cxd as = v.A1;
    const cxd asc = std::conj(as);
    const cxd ms = v.A2 - v.A1 * v.A1;
    const cxd msc = std::conj(ms);
    const double ns = v.N - std::norm(v.A1);

    d.A1 = mu * std::conj(v.A1) - gs * v.A1 - 2.0 * b * std::conj(v.th[0]);
    d.A2 = mu * (2.0 * v.N + 1.0) - 2.0 * gs * v.A2 - 4.0 * b * std::conj(v.th[4]);
    d.N = 2.0 * std::real(mu * std::conj(v.A2)) - 2.0 * gs * v.N
        - 4.0 * b * std::real(v.th[2]);

    const cxd mpc = std::conj(v.mp);
    const cxd Sa = 2.0 * asc * (ns - v.np);
    const cxd Sad = 2.0 * (asc * msc - mpc * as);
    const cxd Sa2 = -v.np * (4.0 * v.N + 2.0) + 4.0 * std::norm(as) * ns + 2.0 * ns * ns;
    const cxd Sad2 = -mpc * (4.0 * v.N + 2.0) + 4.0 * asc * asc * msc + 2.0 * msc * msc;
    const cxd Sn = -2.0 * mpc * v.A2 - 2.0 * v.np * std::conj(v.A2)
                 + 2.0 * asc * asc * ns + 2.0 * std::norm(as) * msc + 2.0 * msc * ns;

    const double gps = gp + gs, gp2s = gp + 2.0 * gs;
    d.th[0] = -gps * v.th[0] + mu_f * v.th[1] + Sa;
    d.th[1] = -gps * v.th[1] + std::conj(mu_f) * v.th[0] + Sad;
    d.th[2] = -gp2s * v.th[2] + 2.0 * mu_f * v.th[4] + Sa2;
    d.th[3] = -gp2s * v.th[3] + 2.0 * std::conj(mu_f) * v.th[4] + Sad2;
    d.th[4] = -gp2s * v.th[4] + mu_f * v.th[3] + std::conj(mu_f) * v.th[2] + Sn;

    d.ap = nu - 0.5 * x * v.A2 - gp * v.ap;

    const SourceVectors sv = source_vectors_gaussian(as, ms, ns);
    const KernelWeights kw = kernel_weights(dec, sv);
    cxd sum_tad = 0.0, sum_ta = 0.0;
    for (int k = 0; k < 3; ++k) {
        const cxd dp = kw.plus[k], dpt = kw.plus_t[k];
        const cxd dm = kw.minus[k], dmt = kw.minus_t[k];
        const cxd Ka = v.mp * (dp - dpt) - (1.0 + v.np) * dm + v.np * dmt;
        const cxd Kad = v.np * dp - (1.0 + v.np) * dpt + mpc * (dmt - dm);
        d.Ta[k] = (dec.lambda[k] - gp) * v.Ta[k] + Ka;
        d.Tad[k] = (dec.lambda[k] - gp) * v.Tad[k] + Kad;
        sum_tad += std::conj(v.Tad[k]);
        sum_ta += v.Ta[k];
    }
    d.mp = -2.0 * gp * v.mp - 2.0 * b * sum_tad;
    d.np = -2.0 * gp * v.np - 2.0 * b * std::real(sum_ta);
}

RealFn cm_fn(const DopoParams& par, cxd frame, const CorrelationDecomposition& dec) {
    return [par, frame, dec](const RVec& xx, RVec& ff) {
        CmVars d;
        cm_rhs(par, frame, dec, unpack_cm(xx), d);
        pack_cm(d, ff);
    };
}

const std::vector<int>& cm_bt_active() {
    // A1 and the h traces against a, a+ vanish on the symmetric manifold
    static const std::vector<int> idx = [] {
        std::vector<int> v;
        for (int i = 0; i < kCmDim; ++i)
            if (i != 0 && i != 1 && i != 5 && i != 6 && i != 7 && i != 8) v.push_back(i);
        return v;
    }();
    return idx;
}

GaussianBranch branch_from_cm(cxd frame, const CmVars& v, const NewtonReport& rep,
                              const char* name) {
    GaussianBranch br;
    br.method = GaussianMethod::gsa_cmop;
    br.branch = name;
    br.alpha_s = v.A1;
    br.alpha_p = frame + v.ap;
    br.m_s = v.A2 - v.A1 * v.A1;
    br.n_s = v.N - std::norm(v.A1);
    br.m_p = v.mp;
    br.n_p = v.np;
    BornAux aux;
    aux.h_traces = v.th;
    aux.T_a = v.Ta;
    aux.T_ad = v.Tad;
    br.born_aux = aux;
    br.residual = rep.residual;
    br.converged = rep.converged && gaussian_physical(br.n_s, br.m_s)
                && gaussian_physical(br.n_p, br.m_p);
    return br;
}

struct CmSolved {
    CmVars v;
    NewtonReport rep;
    cxd frame = 0.0;
};

std::pair<NewtonReport, cxd> cm_newton(const DopoParams& p, CmVars& v,
                                       const std::vector<int>& active) {
    const cxd frame = meanfield_steady(p).alpha_p;
    const auto dec = correlation_decomposition(p.gamma_s, p.chi * frame);
    RVec x;
    pack_cm(v, x);
    NewtonReport rep = masked_newton(cm_fn(p, frame, dec), kCmDim, active, x,
                                     newton_tol(p, x));
    v = unpack_cm(x);
    return {rep, frame};
}

// Symmetric branch, continued in sigma from weak drive when the direct
// solve fails. Steps shrink to 0.01 near threshold.
CmSolved cm_solve_bt(const DopoParams& par) {
    const MeanfieldSteady mf = meanfield_steady(par);
    CmSolved s;
    s.v.A2 = mf.m_s;
    s.v.N = mf.n_s;
    auto [rep, frame] = cm_newton(par, s.v, cm_bt_active());
    s.rep = rep;
    s.frame = frame;
    if (s.rep.converged) return s;

    const double target = par.sigma();
    s.v = CmVars{};
    double sg = std::min(0.5, target);
    while (true) {
        const DopoParams p = params_from_sigma(par.gamma_s, par.gamma_p, par.chi, sg);
        std::tie(s.rep, s.frame) = cm_newton(p, s.v, cm_bt_active());
        if (!s.rep.converged || sg >= target) break;
        const double step = (sg >= 0.89 && sg <= 1.11) ? 0.01 : 0.1;
        sg = std::min(target, sg + step);
    }
    return s;
}

CmVars cm_at_seed(const DopoParams& p, cxd frame) {
    CmVars v{};
    for (const auto& f : classical_fixed_points(p)) {
        if (f.branch != "above-plus") continue;
        v.A1 = f.alpha_s;
        v.A2 = f.alpha_s * f.alpha_s;
        v.N = std::norm(f.alpha_s);
        v.ap = f.alpha_p - frame;
    }
    return v;
}

// Symmetry-breaking branch, walked down in sigma from a strongly driven
// start where the classical seed is reliable.
CmSolved cm_solve_at(const DopoParams& par) {
    const double target = par.sigma();
    const double start = std::max(target, 1.5);
    const DopoParams p0 = params_from_sigma(par.gamma_s, par.gamma_p, par.chi, start);
    CmSolved s;
    s.frame = meanfield_steady(p0).alpha_p;
    s.v = cm_at_seed(p0, s.frame);
    std::tie(s.rep, s.frame) = cm_newton(p0, s.v, index_range(kCmDim));
    double sg = start;
    while (s.rep.converged && sg > target) {
        const double step = (sg > 1.2) ? 0.1 : 0.01;
        sg = std::max(target, sg - step);
        const DopoParams p = params_from_sigma(par.gamma_s, par.gamma_p, par.chi, sg);
        std::tie(s.rep, s.frame) = cm_newton(p, s.v, index_range(kCmDim));
    }
    if (sg > target) {
        // continuation died before reaching the target; record an honest
        // failed attempt at the target itself
        s.v = cm_at_seed(par, meanfield_steady(par).alpha_p);
        std::tie(s.rep, s.frame) = cm_newton(par, s.v, index_range(kCmDim));
    }
    return s;
}

} // namespace

cxd moment_factorize(int raising, int lowering, cxd m, double n) {
    if (raising < 0 || lowering < 0)
        throw UnsupportedMomentError("moment orders must be non-negative");
    const int order = raising + lowering;
    if (order == 3) return 0.0;
    if (order != 4)
        throw UnsupportedMomentError(
            "only third and fourth order fluctuation moments factorize here");
    const cxd mc = std::conj(m);
    switch (raising) {
        case 0: return 3.0 * m * m;
        case 1: return 3.0 * m * n;
        case 2: return mc * m + 2.0 * n * n;
        case 3: return 3.0 * mc * n;
        default: return 3.0 * mc * mc;
    }
}

const char* method_name(GaussianMethod m) {
    switch (m) {
        case GaussianMethod::std_linearization: return "std-linearization";
        case GaussianMethod::gsa_full: return "gsa-full";
        case GaussianMethod::gsa_cmop: return "gsa-cmop";
    }
    return "?";
}

bool gaussian_physical(double n, cxd m, double tol) {
    return n >= -tol && n * (n + 1.0) >= std::norm(m) - tol;
}

std::vector<GaussianBranch> std_linearization(const DopoParams& par) {
    par.validate();
    std::vector<GaussianBranch> out;
    const double gs = par.gamma_s, gp = par.gamma_p, x = par.chi;
    const double sigma = par.sigma();

    GaussianBranch bt;
    bt.method = GaussianMethod::std_linearization;
    bt.branch = "BT";
    bt.alpha_p = par.eps_p / gp;
    const double mu = x * std::abs(bt.alpha_p);
    if (sigma < 1.0) {
        const double den = 2.0 * (gs * gs - mu * mu);
        bt.n_s = mu * mu / den;
        bt.m_s = gs * mu / den;
        bt.converged = true;
    } else {
        // the undepleted-pump fluctuations have no stationary state at or
        // above threshold
        bt.n_s = std::numeric_limits<double>::infinity();
        bt.m_s = std::numeric_limits<double>::infinity();
        bt.diverged = true;
    }
    out.push_back(bt);

    if (sigma <= 1.0) return out;

    const ClassicalFixedPoint* ab = nullptr;
    const auto fps = classical_fixed_points(par);
    for (const auto& f : fps)
        if (f.branch == "above-plus") ab = &f;
    if (!ab) return out;

    const cxd as0 = ab->alpha_s, ap0 = ab->alpha_p;
    using V10 = Eigen::Matrix<double, 10, 1>;
    auto frozen = [&](const V10& y, V10& d) {
        FullVars v{}, dd{};
        v.as = as0;
        v.ap = ap0;
        v.ms = {y(0), y(1)};
        v.ns = y(2);
        v.mp = {y(3), y(4)};
        v.np = y(5);
        v.u = {y(6), y(7)};
        v.w = {y(8), y(9)};
        full_moment_rhs(par, v, dd);
        d << dd.ms.real(), dd.ms.imag(), dd.ns, dd.mp.real(), dd.mp.imag(), dd.np,
            dd.u.real(), dd.u.imag(), dd.w.real(), dd.w.imag();
    };
    V10 c, col;
    frozen(V10::Zero(), c);
    Eigen::Matrix<double, 10, 10> A;
    for (int j = 0; j < 10; ++j) {
        V10 e = V10::Zero();
        e(j) = 1.0;
        frozen(e, col);
        A.col(j) = col - c;
    }
    const V10 y = A.partialPivLu().solve(-c);
    const double res = (A * y + c).norm() / std::sqrt(10.0);

    GaussianBranch plus;
    plus.method = GaussianMethod::std_linearization;
    plus.branch = "AT-plus";
    plus.alpha_s = as0;
    plus.alpha_p = ap0;
    plus.m_s = {y(0), y(1)};
    plus.n_s = y(2);
    plus.m_p = {y(3), y(4)};
    plus.n_p = y(5);
    plus.residual = res;
    plus.converged = y.allFinite() && gaussian_physical(plus.n_s, plus.m_s)
                  && gaussian_physical(plus.n_p, plus.m_p);
    GaussianBranch minus = plus;
    minus.branch = "AT-minus";
    minus.alpha_s = -plus.alpha_s;
    out.push_back(plus);
    out.push_back(minus);
    return out;
}

std::vector<GaussianBranch> gsa_full(const DopoParams& par) {
    par.validate();
    std::vector<GaussianBranch> out;
    const RealFn fn = full_fn(par);

    const MeanfieldSteady mf = meanfield_steady(par);
    {
        FullVars seed{};
        seed.ap = mf.alpha_p;
        seed.ms = mf.m_s;
        seed.ns = mf.n_s;
        RVec x;
        pack_full(seed, x);
        const NewtonReport rep =
            masked_newton(fn, kFullDim, full_bt_active(), x, newton_tol(par, x));
        out.push_back(branch_from_full(unpack_full(x), rep, "BT"));
    }

    if (par.sigma() <= 1.0) return out;

    const ClassicalFixedPoint* ab = nullptr;
    const auto fps = classical_fixed_points(par);
    for (const auto& f : fps)
        if (f.branch == "above-plus") ab = &f;
    if (!ab) return out;

    FullVars seed{};
    seed.as = ab->alpha_s;
    seed.ap = ab->alpha_p;
    for (const auto& lb : std_linearization(par)) {
        if (lb.branch != "AT-plus" || !lb.converged) continue;
        seed.ms = lb.m_s;
        seed.ns = lb.n_s;
        seed.mp = lb.m_p;
        seed.np = lb.n_p;
    }
    RVec x;
    pack_full(seed, x);
    const NewtonReport rep =
        masked_newton(fn, kFullDim, index_range(kFullDim), x, newton_tol(par, x));
    FullVars v = unpack_full(x);
    const bool collapsed = std::norm(v.as) <= 1e-6 * (1.0 + std::abs(v.ns));
    if (!collapsed) {
        if (v.as.real() < 0.0 || (v.as.real() == 0.0 && v.as.imag() < 0.0)) {
            v.as = -v.as;
            v.u = -v.u;
            v.w = -v.w;
        }
        GaussianBranch plus = branch_from_full(v, rep, "AT-plus");
        GaussianBranch minus = plus;
        minus.branch = "AT-minus";
        minus.alpha_s = -plus.alpha_s;
        out.push_back(plus);
        out.push_back(minus);
    } else if (!rep.converged) {
        out.push_back(branch_from_full(v, rep, "AT-plus"));
    }
    return out;
}

std::vector<GaussianBranch> gsa_cmop(const DopoParams& par) {
    par.validate();
    std::vector<GaussianBranch> out;

    const CmSolved bt = cm_solve_bt(par);
    out.push_back(branch_from_cm(bt.frame, bt.v, bt.rep, "BT"));

    if (par.sigma() <= 1.0) return out;

    CmSolved at = cm_solve_at(par);
    const bool collapsed = std::norm(at.v.A1) <= 1e-6 * (1.0 + std::abs(at.v.N));
    if (!collapsed) {
        if (at.v.A1.real() < 0.0 || (at.v.A1.real() == 0.0 && at.v.A1.imag() < 0.0)) {
            at.v.A1 = -at.v.A1;
            at.v.th[0] = -at.v.th[0];
            at.v.th[1] = -at.v.th[1];
        }
        GaussianBranch plus = branch_from_cm(at.frame, at.v, at.rep, "AT-plus");
        GaussianBranch minus = plus;
        minus.branch = "AT-minus";
        minus.alpha_s = -plus.alpha_s;
        if (minus.born_aux) {
            minus.born_aux->h_traces[0] = -minus.born_aux->h_traces[0];
            minus.born_aux->h_traces[1] = -minus.born_aux->h_traces[1];
        }
        out.push_back(plus);
        out.push_back(minus);
    } else if (!at.rep.converged) {
        out.push_back(branch_from_cm(at.frame, at.v, at.rep, "AT-plus"));
    }
    return out;
}

const GaussianBranch* find_branch(const std::vector<GaussianBranch>& branches,
                                  const std::string& name) {
    for (const auto& b : branches)
        if (b.branch == name) return &b;
    return nullptr;
}

double MixtureState::photon_number() const { return plus.n_s + std::norm(plus.alpha_s); }

cxd MixtureState::second_moment() const { return plus.m_s + plus.alpha_s * plus.alpha_s; }

double MixtureState::g2() const { return g2_gaussian(plus.alpha_s, plus.m_s, plus.n_s); }

std::vector<GaussianComponent> MixtureState::wigner_components() const {
    return {{0.5, plus.alpha_s, plus.m_s, plus.n_s},
            {0.5, minus.alpha_s, minus.m_s, minus.n_s}};
}

MixtureState balanced_mixture(const GaussianBranch& plus, const GaussianBranch& minus) {
    if (plus.method != minus.method || plus.branch != "AT-plus" || minus.branch != "AT-minus")
        throw std::invalid_argument(
            "balanced_mixture needs an AT-plus / AT-minus pair from one method");
    const double scale = 1.0 + std::abs(plus.alpha_s);
    if (std::abs(plus.alpha_s + minus.alpha_s) > 1e-8 * scale
        || std::abs(plus.m_s - minus.m_s) > 1e-8 * (1.0 + std::abs(plus.m_s))
        || std::abs(plus.n_s - minus.n_s) > 1e-8 * (1.0 + std::abs(plus.n_s)))
        throw std::invalid_argument("balanced_mixture: branches are not a symmetric pair");
    return {plus, minus};
}

double at_onset_sigma(const DopoParams& base, GaussianMethod method, double sigma_hi) {
    base.validate();
    auto probe = [&](double s) {
        const DopoParams p = params_from_sigma(base.gamma_s, base.gamma_p, base.chi, s);
        const std::vector<GaussianBranch> br = method == GaussianMethod::gsa_full
            ? gsa_full(p)
            : method == GaussianMethod::gsa_cmop ? gsa_cmop(p) : std_linearization(p);
        const GaussianBranch* at = find_branch(br, "AT-plus");
        return at && at->converged && std::norm(at->alpha_s) > 1e-6;
    };
    if (!probe(sigma_hi)) return std::numeric_limits<double>::quiet_NaN();
    double lo = 0.9, hi = sigma_hi;
    if (probe(lo)) return lo;
    while (hi - lo > 1e-3) {
        const double mid = 0.5 * (lo + hi);
        (probe(mid) ? hi : lo) = mid;
    }
    return hi;
}

std::vector<GsaCmopState> gsa_cmop_dynamics(const DopoParams& par,
                                            const std::vector<double>& t_grid,
                                            const EvolveConfig& cfg) {
    par.validate();
    const cxd frame = meanfield_steady(par).alpha_p;
    const auto dec = correlation_decomposition(par.gamma_s, par.chi * frame);

    // complex packing; N and np ride along with zero imaginary part
    Vec y = Vec::Zero(17);
    y(8) = -frame;  // lab vacuum seen from the displaced frame
    Rhs rhs = [par, frame, dec](double, const Vec& yy, Vec& dd) {
        CmVars v, d;
        v.A1 = yy(0);
        v.A2 = yy(1);
        v.N = yy(2).real();
        for (int k = 0; k < 5; ++k) v.th[k] = yy(3 + k);
        v.ap = yy(8);
        v.mp = yy(9);
        v.np = yy(10).real();
        for (int k = 0; k < 3; ++k) {
            v.Ta[k] = yy(11 + k);
            v.Tad[k] = yy(14 + k);
        }
        cm_rhs(par, frame, dec, v, d);
        dd.resize(17);
        dd(0) = d.A1;
        dd(1) = d.A2;
        dd(2) = d.N;
        for (int k = 0; k < 5; ++k) dd(3 + k) = d.th[k];
        dd(8) = d.ap;
        dd(9) = d.mp;
        dd(10) = d.np;
        for (int k = 0; k < 3; ++k) {
            dd(11 + k) = d.Ta[k];
            dd(14 + k) = d.Tad[k];
        }
    };

    std::vector<GsaCmopState> out;
    out.reserve(t_grid.size());
    double t = 0.0;
    for (const double tk : t_grid) {
        if (tk > t) {
            integrate_to(rhs, y, t, tk, cfg);
            t = tk;
        }
        GsaCmopState st;
        st.t = tk;
        st.frame_alpha = frame;
        st.A1 = y(0);
        st.A2 = y(1);
        st.N = y(2).real();
        for (int k = 0; k < 5; ++k) st.h_traces[k] = y(3 + k);
        st.alpha_p = y(8);
        st.m_p = y(9);
        st.n_p = y(10).real();
        for (int k = 0; k < 3; ++k) {
            st.T_a[k] = y(11 + k);
            st.T_ad[k] = y(14 + k);
        }
        out.push_back(st);
    }
    return out;
}

} // namespace dopo
