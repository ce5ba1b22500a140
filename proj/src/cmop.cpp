#include "dopo/cmop.hpp"

#include "dopo/errors.hpp"
#include "dopo/fock.hpp"
#include "dopo/observables.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>

namespace dopo {

SignalOps::SignalOps(int d) : dim(d) {
    if (d < 3) throw DimensionError("signal dimension must be at least 3");
    a = annihilation(d);
    ad = a.adjoint();
    a2 = a * a;
    a2d = a2.adjoint();
    n = number_op(d);
    n_a2d = n * a2d;
    a2_a2d = a2 * a2d;
    a2d_a2d = a2d * a2d;
    a2d_n = a2d * n;
    a2d_a2 = a2d * a2;
    n_a2 = n * a2;
    a2_a2 = a2 * a2;
    a2_n = a2 * n;
}

Eigen::Matrix3cd moment_flow_matrix(double gamma_s, cxd mu) {
    Eigen::Matrix3cd M;
    const double g2 = 2.0 * gamma_s;
    M << -g2, std::conj(mu), mu,
         2.0 * mu, -g2, 0.0,
         2.0 * std::conj(mu), 0.0, -g2;
    return M;
}

CorrelationDecomposition correlation_decomposition(double gamma_s, cxd mu) {
    if (!(gamma_s > 0.0)) throw DimensionError("gamma_s must be positive");
    const double am = std::abs(mu);
    if (am >= gamma_s)
        throw IllPosedFrameError("quadratic signal moments are unstable unless |mu| < gamma_s");
    CorrelationDecomposition dec;
    dec.gamma_s = gamma_s;
    dec.mu = mu;
    if (am < 1e-12 * gamma_s) {
        dec.degenerate = true;
        dec.lambda = {-2.0 * gamma_s, -2.0 * gamma_s, -2.0 * gamma_s};
        dec.projector[0] = Eigen::Matrix3cd::Identity();
        dec.projector[1].setZero();
        dec.projector[2].setZero();
        return dec;
    }
    dec.lambda = {-2.0 * gamma_s, -2.0 * gamma_s - 2.0 * am, -2.0 * gamma_s + 2.0 * am};
    const cxd u = mu / am;
    const cxd ub = std::conj(u);
    Eigen::Matrix3cd M0, M1, M2;
    M0 << 0, 0, 0,
          0, 0.5, -0.5 * u * u,
          0, -0.5 * ub * ub, 0.5;
    M1 << 0.5, -0.25 * ub, -0.25 * u,
          -0.5 * u, 0.25, 0.25 * u * u,
          -0.5 * ub, 0.25 * ub * ub, 0.25;
    M2 << 0.5, 0.25 * ub, 0.25 * u,
          0.5 * u, 0.25, 0.25 * u * u,
          0.5 * ub, 0.25 * ub * ub, 0.25;
    dec.projector = {M0, M1, M2};
    return dec;
}

SourceVectors source_vectors(const SignalOps& o, const Mat& rho) {
    const cxd vn = expval(o.n, rho);
    const cxd v2 = expval(o.a2, rho);
    const cxd v2d = expval(o.a2d, rho);
    SourceVectors s;
    s.up << expval(o.n_a2d, rho) - vn * v2d, expval(o.a2_a2d, rho) - v2 * v2d,
        expval(o.a2d_a2d, rho) - v2d * v2d;
    s.up_t << expval(o.a2d_n, rho) - v2d * vn, expval(o.a2d_a2, rho) - v2d * v2, s.up(2);
    s.dn << expval(o.n_a2, rho) - vn * v2, expval(o.a2_a2, rho) - v2 * v2, s.up_t(1);
    s.dn_t << expval(o.a2_n, rho) - v2 * vn, s.dn(1), s.up(1);
    return s;
}

SourceVectors source_vectors_gaussian(cxd alpha, cxd m, double n) {
    const cxd ac = std::conj(alpha);
    const cxd mc = std::conj(m);
    const double a2n = std::norm(alpha);
    SourceVectors s;
    s.up_t << 2.0 * ac * ac * n + 2.0 * a2n * mc + 2.0 * mc * n, 4.0 * a2n * n + 2.0 * n * n,
        4.0 * ac * ac * mc + 2.0 * mc * mc;
    s.up = s.up_t;
    s.up(0) += 2.0 * (ac * ac + mc);
    s.up(1) += 4.0 * (a2n + n) + 2.0;
    s.dn << 2.0 * alpha * alpha * n + 2.0 * a2n * m + 2.0 * m * n,
        4.0 * alpha * alpha * m + 2.0 * m * m, 4.0 * a2n * n + 2.0 * n * n;
    s.dn_t = s.dn;
    s.dn_t(0) += 2.0 * (alpha * alpha + m);
    s.dn_t(2) += 4.0 * (a2n + n) + 2.0;
    return s;
}

KernelWeights kernel_weights(const CorrelationDecomposition& dec, const SourceVectors& u) {
    KernelWeights w;
    for (int k = 0; k < 3; ++k) {
        w.plus[k] = (dec.projector[k] * u.up)(2);
        w.plus_t[k] = (dec.projector[k] * u.up_t)(2);
        w.minus[k] = (dec.projector[k] * u.dn)(2);
        w.minus_t[k] = (dec.projector[k] * u.dn_t)(2);
    }
    return w;
}

Mat equal_time_signal_source(const SignalOps& o, cxd m_p, double n_p, const Mat& rho) {
    const cxd v2d = expval(o.a2d, rho);
    Mat out = std::conj(m_p) * (o.a2 * rho - rho * o.a2);
    out -= n_p * (o.a2d * rho - rho * o.a2d);
    out += rho * o.a2d;
    out -= v2d * rho;
    return out;
}

namespace {

void signal_rhs_impl(const SignalOps& o, double gs, double gp, cxd mu_frame, cxd mu_total,
                     cxd m_p, double n_p, double b, const Mat& rho, const Mat& h, Mat& drho,
                     Mat& dh, bool parallel) {
    const int D = o.dim;
    drho.resize(D, D);
    dh.resize(D, D);
    const cxd v2d = expval(o.a2d, rho);
    const SpMat Gt = SpMat(0.5 * mu_total * o.a2d) - SpMat(0.5 * std::conj(mu_total) * o.a2);
    const SpMat Gf = SpMat(0.5 * mu_frame * o.a2d) - SpMat(0.5 * std::conj(mu_frame) * o.a2);
    const Mat hadj = h.adjoint();
    const cxd mpc = std::conj(m_p);

    auto block = [&](int c0, int c1) {
        const int w = c1 - c0;
        const auto R = rho.middleCols(c0, w);
        const auto H = h.middleCols(c0, w);
        const auto Ha = hadj.middleCols(c0, w);
        drho.middleCols(c0, w) =
            Gt * R - rho * Gt.middleCols(c0, w) +
            gs * (2.0 * (o.a * (rho * o.ad.middleCols(c0, w))) - o.n * R -
                  rho * o.n.middleCols(c0, w)) +
            b * (o.a2 * H - h * o.a2.middleCols(c0, w) - o.a2d * Ha +
                 hadj * o.a2d.middleCols(c0, w));
        dh.middleCols(c0, w) =
            Gf * H - h * Gf.middleCols(c0, w) +
            gs * (2.0 * (o.a * (h * o.ad.middleCols(c0, w))) - o.n * H -
                  h * o.n.middleCols(c0, w)) -
            gp * H + mpc * (o.a2 * R - rho * o.a2.middleCols(c0, w)) -
            n_p * (o.a2d * R - rho * o.a2d.middleCols(c0, w)) + rho * o.a2d.middleCols(c0, w) -
            v2d * R;
    };

#ifdef _OPENMP
    if (parallel && D >= 64) {
        const int nblk = 8;
        const int step = (D + nblk - 1) / nblk;
#pragma omp parallel for schedule(static)
        for (int k = 0; k < nblk; ++k) {
            const int c0 = k * step;
            if (c0 < D) block(c0, std::min(D, c0 + step));
        }
        return;
    }
#else
    (void)parallel;
#endif
    block(0, D);
}

} // namespace

void signal_rhs(const SignalOps& ops, double gamma_s, double gamma_p, cxd mu_frame, cxd mu_total,
                cxd m_p, double n_p, double born_weight, const Mat& rho_s, const Mat& h_s,
                Mat& drho, Mat& dh) {
    signal_rhs_impl(ops, gamma_s, gamma_p, mu_frame, mu_total, m_p, n_p, born_weight, rho_s, h_s,
                    drho, dh, true);
}

void signal_rhs_serial(const SignalOps& ops, double gamma_s, double gamma_p, cxd mu_frame,
                       cxd mu_total, cxd m_p, double n_p, double born_weight, const Mat& rho_s,
                       const Mat& h_s, Mat& drho, Mat& dh) {
    signal_rhs_impl(ops, gamma_s, gamma_p, mu_frame, mu_total, m_p, n_p, born_weight, rho_s, h_s,
                    drho, dh, false);
}

namespace {

constexpr int kScalars = 20;

struct PumpSources {
    std::array<cxd, 3> K_a, K_ad, K_a2, K_ad2, K_n;
};

// Trace sources of the mode-resolved pump auxiliary operators against the
// tracked observables, for the current pump moments and kernel weights.
PumpSources pump_sources(const PumpMoments& p, const KernelWeights& w) {
    PumpSources s;
    const cxd a = p.alpha, ac = std::conj(p.alpha);
    const cxd m = p.m, mc = std::conj(p.m);
    const double n = p.n;
    const cxd c21c = std::conj(p.c21);
    for (int k = 0; k < 3; ++k) {
        const cxd dp = w.plus[k], dpt = w.plus_t[k], dm = w.minus[k], dmt = w.minus_t[k];
        s.K_a[k] = m * (dp - dpt) - (1.0 + n) * dm + n * dmt;
        s.K_ad[k] = n * dp - (1.0 + n) * dpt + mc * (dmt - dm);
        s.K_a2[k] = (2.0 * a * m + p.c30) * (dp - dpt) - (2.0 * a * (1.0 + n) + p.c21) * dm +
                    (2.0 * a * n + p.c21) * dmt;
        s.K_ad2[k] = (2.0 * ac * n + c21c) * dp - (2.0 * ac * (1.0 + n) + c21c) * dpt +
                     (2.0 * ac * mc + std::conj(p.c30)) * (dmt - dm);
        s.K_n[k] = (ac * m + a * n + p.c21) * dp - (ac * m + a * (n + 1.0) + p.c21) * dpt -
                   (ac * (n + 1.0) + a * mc + c21c) * dm + (ac * n + a * mc + c21c) * dmt;
    }
    return s;
}

void unpack_pump(const Vec& y, long base, PumpMoments& p) {
    p.alpha = y(base + 0);
    p.m = y(base + 1);
    p.n = y(base + 2).real();
    p.c30 = y(base + 3);
    p.c21 = y(base + 4);
    for (int k = 0; k < 3; ++k) {
        p.T_a[k] = y(base + 5 + k);
        p.T_ad[k] = y(base + 8 + k);
        p.T_a2[k] = y(base + 11 + k);
        p.T_ad2[k] = y(base + 14 + k);
        p.T_n[k] = y(base + 17 + k);
    }
}

void pack_pump(const PumpMoments& p, long base, Vec& y) {
    y(base + 0) = p.alpha;
    y(base + 1) = p.m;
    y(base + 2) = p.n;
    y(base + 3) = p.c30;
    y(base + 4) = p.c21;
    for (int k = 0; k < 3; ++k) {
        y(base + 5 + k) = p.T_a[k];
        y(base + 8 + k) = p.T_ad[k];
        y(base + 11 + k) = p.T_a2[k];
        y(base + 14 + k) = p.T_ad2[k];
        y(base + 17 + k) = p.T_n[k];
    }
}

struct MomentWorkspace {
    DopoParams par;
    cxd frame;
    cxd nu;
    double b;
    SignalOps ops;
    CorrelationDecomposition dec;
    mutable Mat rho, h, drho, dh;

    MomentWorkspace(const DopoParams& p, int dim_s, cxd frame_alpha, bool born)
        : par(p), frame(frame_alpha), nu(p.eps_p - p.gamma_p * frame_alpha),
          b(born ? 0.25 * p.chi * p.chi : 0.0), ops(dim_s),
          dec(correlation_decomposition(p.gamma_s, p.chi * frame_alpha)) {}

    long size() const { return 2L * ops.dim * ops.dim + kScalars; }

    void rhs(const Vec& y, Vec& dy) const {
        const int D = ops.dim;
        const long n2 = static_cast<long>(D) * D;
        dy.resize(size());
        rho = Eigen::Map<const Mat>(y.data(), D, D);
        h = Eigen::Map<const Mat>(y.data() + n2, D, D);
        PumpMoments p;
        unpack_pump(y, 2 * n2, p);

        const cxd s2 = expval(ops.a2, rho);
        const cxd mu_total = par.chi * (frame + p.alpha);
        signal_rhs(ops, par.gamma_s, par.gamma_p, dec.mu, mu_total, p.m, p.n, b, rho, h, drho, dh);
        Eigen::Map<Mat>(dy.data(), D, D) = drho;
        Eigen::Map<Mat>(dy.data() + n2, D, D) = dh;

        const KernelWeights w = kernel_weights(dec, source_vectors(ops, rho));
        const PumpSources src = pump_sources(p, w);
        const double gp = par.gamma_p;
        cxd sum_Ta = 0.0, sum_cTad = 0.0, sum_cTad2 = 0.0, sum_Ta2 = 0.0, sum_cTn = 0.0;
        for (int k = 0; k < 3; ++k) {
            sum_Ta += p.T_a[k];
            sum_cTad += std::conj(p.T_ad[k]);
            sum_cTad2 += std::conj(p.T_ad2[k]);
            sum_Ta2 += p.T_a2[k];
            sum_cTn += std::conj(p.T_n[k]);
        }
        const cxd B2 = -2.0 * b * sum_cTad;
        const double BN = -2.0 * b * sum_Ta.real();
        const cxd B3 = -3.0 * b * sum_cTad2;
        const cxd B21 = -b * (sum_Ta2 + 2.0 * sum_cTn);

        const long base = 2 * n2;
        dy(base + 0) = nu - 0.5 * par.chi * s2 - gp * p.alpha;
        dy(base + 1) = -2.0 * gp * p.m + B2;
        dy(base + 2) = -2.0 * gp * p.n + BN;
        dy(base + 3) = -3.0 * gp * p.c30 + B3 - 3.0 * p.alpha * B2;
        dy(base + 4) = -3.0 * gp * p.c21 + B21 - std::conj(p.alpha) * B2 - 2.0 * p.alpha * BN;
        for (int k = 0; k < 3; ++k) {
            const cxd lam = dec.lambda[k];
            dy(base + 5 + k) = (lam - gp) * p.T_a[k] + src.K_a[k];
            dy(base + 8 + k) = (lam - gp) * p.T_ad[k] + src.K_ad[k];
            dy(base + 11 + k) = (lam - 2.0 * gp) * p.T_a2[k] + 2.0 * nu * p.T_a[k] + src.K_a2[k];
            dy(base + 14 + k) =
                (lam - 2.0 * gp) * p.T_ad2[k] + 2.0 * std::conj(nu) * p.T_ad[k] + src.K_ad2[k];
            dy(base + 17 + k) = (lam - 2.0 * gp) * p.T_n[k] + nu * p.T_ad[k] +
                                std::conj(nu) * p.T_a[k] + src.K_n[k];
        }
    }
};

struct MatrixWorkspace {
    DopoParams par;
    cxd frame;
    cxd nu;
    double b;
    SignalOps ops;
    CorrelationDecomposition dec;
    int dim_p;
    SpMat ap, apd, np;
    mutable Mat rho_s, h_s, drho_s, dh_s, rho_p, scratch;

    MatrixWorkspace(const DopoParams& p, int dim_s, int dp, cxd frame_alpha, bool born)
        : par(p), frame(frame_alpha), nu(p.eps_p - p.gamma_p * frame_alpha),
          b(born ? 0.25 * p.chi * p.chi : 0.0), ops(dim_s),
          dec(correlation_decomposition(p.gamma_s, p.chi * frame_alpha)), dim_p(dp) {
        if (dp < 4) throw DimensionError("matrix pump backend needs dim_p >= 4");
        ap = annihilation(dp);
        apd = ap.adjoint();
        np = number_op(dp);
    }

    long size() const {
        return 2L * ops.dim * ops.dim + 4L * dim_p * dim_p;
    }

    Mat pump_generator_apply(const Mat& x, cxd backreaction) const {
        // [nu a+ - conj(nu) a + backreaction-drive, x] + gamma_p D[a] x
        Mat out = nu * (apd * x - x * apd) - std::conj(nu) * (ap * x - x * ap);
        out += backreaction * (ap * x - x * ap);
        out -= std::conj(backreaction) * (apd * x - x * apd);
        out += par.gamma_p * (2.0 * (ap * (x * apd)) - np * x - x * np);
        return out;
    }

    void rhs(const Vec& y, Vec& dy) const {
        const int Ds = ops.dim, Dp = dim_p;
        const long n2 = static_cast<long>(Ds) * Ds;
        const long p2 = static_cast<long>(Dp) * Dp;
        dy.resize(size());
        rho_s = Eigen::Map<const Mat>(y.data(), Ds, Ds);
        h_s = Eigen::Map<const Mat>(y.data() + n2, Ds, Ds);
        rho_p = Eigen::Map<const Mat>(y.data() + 2 * n2, Dp, Dp);

        const cxd alpha_p = expval(ap, rho_p);
        const cxd full2 = expval(SpMat(ap * ap), rho_p);
        const cxd m_p = full2 - alpha_p * alpha_p;
        const double n_p = std::real(expval(np, rho_p)) - std::norm(alpha_p);
        const cxd s2 = expval(ops.a2, rho_s);

        const cxd mu_total = par.chi * (frame + alpha_p);
        signal_rhs(ops, par.gamma_s, par.gamma_p, dec.mu, mu_total, m_p, n_p, b, rho_s, h_s,
                   drho_s, dh_s);
        Eigen::Map<Mat>(dy.data(), Ds, Ds) = drho_s;
        Eigen::Map<Mat>(dy.data() + n2, Ds, Ds) = dh_s;

        const KernelWeights w = kernel_weights(dec, source_vectors(ops, rho_s));

        Mat H = Mat::Zero(Dp, Dp);
        for (int k = 0; k < 3; ++k)
            H += Eigen::Map<const Mat>(y.data() + 2 * n2 + (1 + k) * p2, Dp, Dp);

        // reduced pump equation: frame generator, signal backreaction, coupling term
        scratch = pump_generator_apply(rho_p, 0.5 * par.chi * std::conj(s2));
        scratch += b * (ap * H - H * ap);
        {
            const Mat Hadj = H.adjoint();
            scratch -= b * (apd * Hadj - Hadj * apd);
        }
        Eigen::Map<Mat>(dy.data() + 2 * n2, Dp, Dp) = scratch;

        for (int k = 0; k < 3; ++k) {
            const Mat hk = Eigen::Map<const Mat>(y.data() + 2 * n2 + (1 + k) * p2, Dp, Dp);
            scratch = pump_generator_apply(hk, 0.0) + dec.lambda[k] * hk;
            // one-sided fluctuation sources, dA = a - alpha_p
            scratch += w.plus[k] * (ap * rho_p - alpha_p * rho_p);
            scratch -= w.plus_t[k] * (rho_p * ap - alpha_p * rho_p);
            scratch -= w.minus[k] * (apd * rho_p - std::conj(alpha_p) * rho_p);
            scratch += w.minus_t[k] * (rho_p * apd - std::conj(alpha_p) * rho_p);
            Eigen::Map<Mat>(dy.data() + 2 * n2 + (1 + k) * p2, Dp, Dp) = scratch;
        }
    }
};

cxd resolve_frame(const DopoParams& par, bool auto_frame, cxd frame_alpha) {
    if (!auto_frame) return frame_alpha;
    if (par.eps_p == 0.0) return 0.0;
    return meanfield_steady(par).alpha_p;
}

} // namespace

std::vector<CmopState> cmop_dynamics(const DopoParams& par, const std::vector<double>& t_grid,
                                     const CmopOptions& opt) {
    par.validate();
    if (t_grid.empty()) return {};
    const cxd frame = resolve_frame(par, opt.auto_frame, opt.frame_alpha);
    const int D = opt.dim_s;
    const long n2 = static_cast<long>(D) * D;

    std::vector<CmopState> out;
    out.reserve(t_grid.size());

    auto emit = [&](double t, const Vec& y, const MatrixWorkspace* mw) {
        CmopState st;
        st.t = t;
        st.frame_alpha = frame;
        st.rho_s = hermitize(Eigen::Map<const Mat>(y.data(), D, D));
        st.h_s = Eigen::Map<const Mat>(y.data() + n2, D, D);
        const double tr = st.rho_s.trace().real();
        if (std::abs(tr - 1.0) > 1e-6)
            throw SolverError("reduced signal trace drifted to " + std::to_string(tr));
        st.rho_s /= tr;
        if (mw) {
            const int Dp = mw->dim_p;
            const long p2 = static_cast<long>(Dp) * Dp;
            st.rho_p = hermitize(Eigen::Map<const Mat>(y.data() + 2 * n2, Dp, Dp));
            for (int k = 0; k < 3; ++k)
                st.h_p[k] = Eigen::Map<const Mat>(y.data() + 2 * n2 + (1 + k) * p2, Dp, Dp);
            const ModeMoments mm = mode_moments(st.rho_p);
            st.pump.alpha = mm.alpha;
            st.pump.m = mm.m;
            st.pump.n = mm.n;
            const double tail = std::abs(st.rho_p(Dp - 1, Dp - 1).real());
            if (tail > opt.pump_tail_tol)
                throw TruncationError("pump population",
                                      "pump tail population " + std::to_string(tail) +
                                          " exceeds tolerance at dim_p=" + std::to_string(Dp));
        } else {
            unpack_pump(y, 2 * n2, st.pump);
        }
        out.push_back(std::move(st));
    };

    const bool lab = opt.start == CmopStart::lab_vacuum;

    if (opt.backend == PumpBackend::moments) {
        MomentWorkspace w(par, D, frame, opt.born_term);
        Vec y = Vec::Zero(w.size());
        y(0) = 1.0;  // signal vacuum
        if (lab) y(2 * n2 + 0) = -frame;
        auto rhs = [&w](double, const Vec& yy, Vec& dyy) { w.rhs(yy, dyy); };
        double t = t_grid.front();
        if (t != 0.0) integrate_to(rhs, y, 0.0, t, opt.ode);
        emit(t, y, nullptr);
        for (std::size_t i = 1; i < t_grid.size(); ++i) {
            integrate_to(rhs, y, t, t_grid[i], opt.ode);
            t = t_grid[i];
            emit(t, y, nullptr);
        }
    } else {
        MatrixWorkspace w(par, D, opt.dim_p, frame, opt.born_term);
        const long p2 = static_cast<long>(opt.dim_p) * opt.dim_p;
        Vec y = Vec::Zero(w.size());
        y(0) = 1.0;
        const Mat rp0 = lab ? projector(coherent_state(opt.dim_p, -frame))
                            : projector(fock_state(opt.dim_p, 0));
        Eigen::Map<Mat>(y.data() + 2 * n2, opt.dim_p, opt.dim_p) = rp0;
        (void)p2;
        auto rhs = [&w](double, const Vec& yy, Vec& dyy) { w.rhs(yy, dyy); };
        double t = t_grid.front();
        if (t != 0.0) integrate_to(rhs, y, 0.0, t, opt.ode);
        emit(t, y, &w);
        for (std::size_t i = 1; i < t_grid.size(); ++i) {
            integrate_to(rhs, y, t, t_grid[i], opt.ode);
            t = t_grid[i];
            emit(t, y, &w);
        }
    }
    return out;
}

namespace {

// Preconditioned BiCGSTAB over the real field on complex storage. The
// operator may carry an antilinear part (it acts on adjoints of the
// unknown), which is linear over the reals but not over the complex
// numbers, so every scalar coefficient is a real inner product of the
// stacked real and imaginary components. Returns iterations used, or -1
// when the residual target was not reached.
using ApplyFn = std::function<void(const Vec&, Vec&)>;

long bicgstab_real(const ApplyFn& A, const ApplyFn& P, const Vec& b, Vec& x, double tol,
                   long maxit) {
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero(b.size());
        return 0;
    }
    if (x.size() != b.size()) x = Vec::Zero(b.size());
    const auto rdot = [](const Vec& u, const Vec& v) { return u.dot(v).real(); };
    Vec r(b.size());
    A(x, r);
    r = b - r;
    const Vec rhat = r;
    double rho_prev = 1.0, alpha = 1.0, omega = 1.0;
    Vec v = Vec::Zero(b.size()), p = Vec::Zero(b.size());
    Vec phat(b.size()), shat(b.size()), t(b.size());
    for (long it = 1; it <= maxit; ++it) {
        const double rho = rdot(rhat, r);
        if (std::abs(rho) < 1e-300) return -1;
        const double beta = (rho / rho_prev) * (alpha / omega);
        rho_prev = rho;
        p = r + beta * (p - omega * v);
        P(p, phat);
        A(phat, v);
        const double denom = rdot(rhat, v);
        if (std::abs(denom) < 1e-300) return -1;
        alpha = rho / denom;
        const Vec s = r - alpha * v;
        if (s.norm() <= tol * bnorm) {
            x += alpha * phat;
            return it;
        }
        P(s, shat);
        A(shat, t);
        const double tn = t.squaredNorm();
        if (tn == 0.0) return -1;
        omega = rdot(t, s) / tn;
        x += alpha * phat + omega * shat;
        r = s - omega * t;
        if (r.norm() <= tol * bnorm) return it;
    }
    return -1;
}

} // namespace

CmopSteadyResult cmop_steady(const DopoParams& par, const CmopSteadyOptions& opt) {
    par.validate();
    const cxd frame = resolve_frame(par, opt.auto_frame, opt.frame_alpha);
    const int D = opt.dim_s;
    MomentWorkspace w(par, D, frame, opt.born_term);
    const SignalOps& ops = w.ops;
    const double gs = par.gamma_s, gp = par.gamma_p, chi = par.chi;
    const cxd nu = w.nu;

    const SpMat Gf = SpMat(0.5 * w.dec.mu * ops.a2d) - SpMat(0.5 * std::conj(w.dec.mu) * ops.a2);
    const SpMat Ls = build_liouvillian({{1.0, Gf}}, {{gs, ops.a}});
    const SpMat C2d = commutator_superop(ops.a2d);
    const SpMat C2 = commutator_superop(ops.a2);
    SpMat Isp(Ls.rows(), Ls.cols());
    Isp.setIdentity();
    const double eta = 1e-8 * norm_scale(Ls);

    // auxiliary-operator solve has a fixed matrix: factor once
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_h;
    {
        SpMat Ah = SpMat(gp * Isp) - Ls;
        Ah.makeCompressed();
        lu_h.compute(Ah);
        if (lu_h.info() != Eigen::Success)
            throw SolverError("factorization of the auxiliary-operator system failed");
    }

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_eff;
    bool analyzed = false;
    auto assemble = [&](cxd beta) {
        SpMat A = Ls + SpMat(0.5 * chi * beta * C2d) - SpMat(0.5 * chi * std::conj(beta) * C2) -
                  SpMat(eta * Isp);
        A.makeCompressed();
        return A;
    };
    auto refactor = [&](const SpMat& A) {
        if (!analyzed) {
            lu_eff.analyzePattern(A);
            analyzed = true;
        }
        lu_eff.factorize(A);
        if (lu_eff.info() != Eigen::Success)
            throw SolverError("factorization of the effective signal system failed");
    };

    Mat rho = Mat::Zero(D, D);
    rho(0, 0) = 1.0;
    // above threshold the state sits close to an even mixture of the two
    // classical amplitudes; starting there keeps the damped outer iteration
    // inside its contraction basin from the first sweep
    if (par.sigma() > 1.0) {
        const double amp = std::sqrt(2.0 * (par.sigma() - 1.0) * gs * gp) / chi;
        Vec c = Vec::Zero(D);
        c(0) = std::exp(-0.5 * amp * amp);
        for (int k = 1; k < D; ++k) c(k) = c(k - 1) * amp / std::sqrt(double(k));
        if (c.norm() > 0.9) {
            rho.setZero();
            for (int i = 0; i < D; ++i)
                for (int j = (i & 1); j < D; j += 2) rho(i, j) = c(i) * c(j);
            rho /= rho.trace().real();
        }
    }
    PumpMoments pm;
    pm.alpha = (nu - 0.5 * chi * expval(ops.a2, rho)) / gp;
    Mat h = Mat::Zero(D, D);

    double theta = opt.theta;
    double prev_err = 1e300;
    double err = 1e300;
    int sweep = 0;
    cxd beta_fact = pm.alpha;
    bool have_lu = false;
    bool picard_ok = true;

    for (; sweep < opt.max_sweeps; ++sweep) {
        // kernel weights and steady auxiliary traces at the current iterate
        const KernelWeights kw = kernel_weights(w.dec, source_vectors(ops, rho));
        const PumpSources src = pump_sources(pm, kw);
        PumpMoments pn = pm;
        for (int k = 0; k < 3; ++k) {
            const cxd lam = w.dec.lambda[k];
            pn.T_a[k] = src.K_a[k] / (gp - lam);
            pn.T_ad[k] = src.K_ad[k] / (gp - lam);
            pn.T_a2[k] = (2.0 * nu * pn.T_a[k] + src.K_a2[k]) / (2.0 * gp - lam);
            pn.T_ad2[k] = (2.0 * std::conj(nu) * pn.T_ad[k] + src.K_ad2[k]) / (2.0 * gp - lam);
            pn.T_n[k] =
                (nu * pn.T_ad[k] + std::conj(nu) * pn.T_a[k] + src.K_n[k]) / (2.0 * gp - lam);
        }
        const double b = w.b;
        cxd sum_Ta = 0.0, sum_cTad = 0.0, sum_cTad2 = 0.0, sum_Ta2 = 0.0, sum_cTn = 0.0;
        for (int k = 0; k < 3; ++k) {
            sum_Ta += pn.T_a[k];
            sum_cTad += std::conj(pn.T_ad[k]);
            sum_cTad2 += std::conj(pn.T_ad2[k]);
            sum_Ta2 += pn.T_a2[k];
            sum_cTn += std::conj(pn.T_n[k]);
        }
        const cxd B2 = -2.0 * b * sum_cTad;
        const double BN = -2.0 * b * sum_Ta.real();
        const cxd B3 = -3.0 * b * sum_cTad2;
        const cxd B21 = -b * (sum_Ta2 + 2.0 * sum_cTn);
        pn.alpha = (nu - 0.5 * chi * expval(ops.a2, rho)) / gp;
        pn.m = B2 / (2.0 * gp);
        pn.n = BN / (2.0 * gp);
        pn.c30 = (B3 - 3.0 * pn.alpha * B2) / (3.0 * gp);
        pn.c21 = (B21 - std::conj(pn.alpha) * B2 - 2.0 * pn.alpha * BN) / (3.0 * gp);

        // given the pump moments, the chain state -> auxiliary operator ->
        // coupling feedback is linear over the reals, so the whole signal
        // equation collapses to one null-space problem; solving it jointly
        // sidesteps the ladder-top amplification that makes a split sweep
        // diverge once the feedback gain at the truncation edge passes one
        if (!have_lu || std::abs(pn.alpha - beta_fact) > 0.2 * gs / chi) {
            refactor(assemble(beta_fact = pn.alpha));
            have_lu = true;
        }
        const SpMat A_eff = assemble(pn.alpha);
        const cxd v2d = expval(ops.a2d, rho);
        const ApplyFn apply_joint = [&](const Vec& v, Vec& out) {
            const Mat X = unvec(v, D);
            Mat K = std::conj(pn.m) * (ops.a2 * X - X * ops.a2);
            K -= pn.n * (ops.a2d * X - X * ops.a2d);
            K += X * ops.a2d;
            K -= v2d * X;
            const Mat hX = unvec(Vec(lu_h.solve(vec_of(K))), D);
            Mat CX = b * (ops.a2 * hX - hX * ops.a2);
            const Mat hXa = hX.adjoint();
            CX -= b * (ops.a2d * hXa - hXa * ops.a2d);
            out = A_eff * v + vec_of(CX);
        };
        const ApplyFn precond = [&](const Vec& v, Vec& out) { out = lu_eff.solve(v); };

        // null direction of the joint generator, by shifted inverse iteration;
        // one step purifies once the iterate is close, and the solve only
        // needs as many digits as the outer increment currently has
        const int purify = err > 0.1 ? 2 : 1;
        const double inner_tol = std::clamp(1e-4 * std::min(err, 1.0), 1e-11, 1e-6);
        Vec z = vec_of(rho);
        for (int k = 0; k < purify && picard_ok; ++k) {
            Vec zn = z;
            const long it = bicgstab_real(apply_joint, precond, z, zn, inner_tol, 250);
            if (std::getenv("DOPO_CMOP_TRACE"))
                std::fprintf(stderr, "[joint] it=%ld\n", it);
            if (it < 0 || !zn.allFinite()) {
                picard_ok = false;
                break;
            }
            const cxd tr = unvec(zn, D).trace();
            if (std::abs(tr) < 1e-300) {
                picard_ok = false;
                break;
            }
            z = zn / tr;
        }
        if (!picard_ok) break;
        Mat rho_new = hermitize(unvec(z, D));
        // the steady state lives in the even parity sector; the shifted
        // inverse iteration amplifies roundoff in the odd sector, whose
        // eigenvalue can sit far closer to zero
        for (int i = 0; i < D; ++i)
            for (int j = (i & 1) ? 0 : 1; j < D; j += 2) rho_new(i, j) = 0.0;
        rho_new /= rho_new.trace().real();
        const Mat h_new =
            unvec(Vec(lu_h.solve(vec_of(equal_time_signal_source(ops, pn.m, pn.n, rho_new)))), D);

        // damped update and increment bookkeeping
        const double scale =
            std::sqrt(rho.squaredNorm() + std::norm(pm.alpha) + std::norm(pm.m) + pm.n * pm.n) +
            1.0;
        const double diff = std::sqrt((rho_new - rho).squaredNorm() + std::norm(pn.alpha - pm.alpha) +
                                      std::norm(pn.m - pm.m) + (pn.n - pm.n) * (pn.n - pm.n));
        err = diff / scale;
        if (std::getenv("DOPO_CMOP_TRACE"))
            std::fprintf(stderr, "[sweep %d] err=%.3e theta=%.2f\n", sweep, err, theta);
        if (!std::isfinite(err) || err > 100.0) {
            picard_ok = false;
            break;
        }
        rho += theta * (rho_new - rho);
        pm.alpha += theta * (pn.alpha - pm.alpha);
        pm.m += theta * (pn.m - pm.m);
        pm.n += theta * (pn.n - pm.n);
        pm.c30 += theta * (pn.c30 - pm.c30);
        pm.c21 += theta * (pn.c21 - pm.c21);
        pm.T_a = pn.T_a;
        pm.T_ad = pn.T_ad;
        pm.T_a2 = pn.T_a2;
        pm.T_ad2 = pn.T_ad2;
        pm.T_n = pn.T_n;
        h = h_new;

        if (err < opt.tol) {
            ++sweep;
            break;
        }
        if (err > prev_err * 1.2)
            theta = std::max(0.05, 0.5 * theta);
        else
            theta = std::min(1.0, 1.3 * theta);
        prev_err = err;
    }

    bool converged = err < opt.tol;
    if (!picard_ok || (!converged && err > 1e-4)) {
        // the sweep map amplifies ladder-top components once the Born weight
        // times the top matrix elements of a^2 overcomes their damping; the
        // transient equations stay contractive there, so relax them in
        // pseudo-time from the frame vacuum instead
        Vec y = Vec::Zero(w.size());
        y(0) = 1.0;
        EvolveConfig ecfg;
        ecfg.rtol = 1e-11;
        ecfg.atol = 1e-13;
        ecfg.steady_residual = 1e-8 * gs;
        ecfg.max_time = 4000.0;
        const Rhs f = [&w](double, const Vec& yy, Vec& dyy) { w.rhs(yy, dyy); };
        std::function<void(double, const Vec&)> watch;
        if (std::getenv("DOPO_CMOP_TRACE")) {
            watch = [last = std::make_shared<double>(0.0), n = std::make_shared<long>(0)](
                        double t, const Vec&) {
                ++*n;
                const double wall =
                    std::chrono::duration<double>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count();
                if (wall - *last > 2.0) {
                    std::fprintf(stderr, "[relax] t=%.3f steps=%ld\n", t, *n);
                    *last = wall;
                }
            };
        }
        const SteadyRun run = integrate_to_steady(f, y, 0.0, ecfg, watch);
        const long m2 = static_cast<long>(D) * D;
        rho = hermitize(Eigen::Map<const Mat>(y.data(), D, D));
        const double tr = rho.trace().real();
        if (std::abs(tr - 1.0) > 1e-6)
            throw SolverError("reduced signal trace drifted to " + std::to_string(tr));
        rho /= tr;
        h = Eigen::Map<const Mat>(y.data() + m2, D, D);
        unpack_pump(y, 2 * m2, pm);
        err = run.residual / gs;
        converged = run.converged;
    }

    // recompute consistent auxiliary traces for the final pump moments
    {
        const KernelWeights kw = kernel_weights(w.dec, source_vectors(ops, rho));
        const PumpSources src = pump_sources(pm, kw);
        for (int k = 0; k < 3; ++k) {
            const cxd lam = w.dec.lambda[k];
            pm.T_a[k] = src.K_a[k] / (gp - lam);
            pm.T_ad[k] = src.K_ad[k] / (gp - lam);
            pm.T_a2[k] = (2.0 * nu * pm.T_a[k] + src.K_a2[k]) / (2.0 * gp - lam);
            pm.T_ad2[k] = (2.0 * std::conj(nu) * pm.T_ad[k] + src.K_ad2[k]) / (2.0 * gp - lam);
            pm.T_n[k] =
                (nu * pm.T_ad[k] + std::conj(nu) * pm.T_a[k] + src.K_n[k]) / (2.0 * gp - lam);
        }
    }

    CmopSteadyResult res;
    res.frame_alpha = frame;
    res.rho_s = rho;
    res.h_s = h;
    res.pump = pm;
    res.increment = err;
    res.sweeps = sweep;
    res.converged = converged;

    Vec y = Vec::Zero(w.size());
    const long n2 = static_cast<long>(D) * D;
    Eigen::Map<Mat>(y.data(), D, D) = rho;
    Eigen::Map<Mat>(y.data() + n2, D, D) = h;
    pack_pump(pm, 2 * n2, y);
    Vec dy;
    w.rhs(y, dy);
    res.residual = rms_norm(dy) / par.gamma_s;
    return res;
}

SpMat adiabatic_liouvillian(const DopoParams& par, int dim_s) {
    par.validate();
    const SpMat a = annihilation(dim_s);
    const SpMat a2 = SpMat(a * a);
    const SpMat a2d = a2.adjoint();
    const double gs = par.gamma_s;
    const SpMat G = SpMat(0.5 * gs * par.sigma() * a2d) - SpMat(0.5 * gs * par.sigma() * a2);
    return build_liouvillian({{1.0, G}},
                             {{0.25 * gs * par.g_squared(), a2}, {gs, a}});
}

AdiabaticSteady adiabatic_steady(const DopoParams& par, int dim_s, const SteadyOptions& opt) {
    const SpMat L = adiabatic_liouvillian(par, dim_s);
    const SteadyResult sr = steady_state(L, dim_s, opt);
    AdiabaticSteady out;
    out.rho_s = sr.rho;
    out.residual = sr.residual;
    out.gap = sr.gap;
    return out;
}

namespace {

std::size_t sparse_bytes(const SpMat& m) {
    return static_cast<std::size_t>(m.nonZeros()) * (sizeof(cxd) + sizeof(int)) +
           static_cast<std::size_t>(m.outerSize() + 1) * sizeof(int);
}

} // namespace

RhsCost measure_cmop_cost(const DopoParams& par, int dim_s, int evals) {
    MomentWorkspace w(par, dim_s, resolve_frame(par, true, 0.0), true);
    Vec y = Vec::Zero(w.size());
    const long n2 = static_cast<long>(dim_s) * dim_s;
    Eigen::Map<Mat>(y.data(), dim_s, dim_s) = Mat::Identity(dim_s, dim_s) / dim_s;
    Eigen::Map<Mat>(y.data() + n2, dim_s, dim_s) =
        Mat::Constant(dim_s, dim_s, cxd(1e-3, 1e-3));
    y(2 * n2 + 0) = -0.1;
    Vec dy;
    std::vector<double> times;
    times.reserve(evals);
    for (int k = 0; k < evals; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        w.rhs(y, dy);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    RhsCost cost;
    cost.state_bytes = static_cast<std::size_t>(w.size()) * sizeof(cxd);
    const SignalOps& o = w.ops;
    cost.generator_bytes = sparse_bytes(o.a) + sparse_bytes(o.ad) + sparse_bytes(o.a2) +
                           sparse_bytes(o.a2d) + sparse_bytes(o.n) + sparse_bytes(o.n_a2d) +
                           sparse_bytes(o.a2_a2d) + sparse_bytes(o.a2d_a2d) +
                           sparse_bytes(o.a2d_n) + sparse_bytes(o.a2d_a2) + sparse_bytes(o.n_a2) +
                           sparse_bytes(o.a2_a2) + sparse_bytes(o.a2_n);
    cost.workspace_bytes = 9 * cost.state_bytes + 5 * static_cast<std::size_t>(n2) * sizeof(cxd);
    cost.median_rhs_seconds = times[times.size() / 2];
    cost.evals = evals;
    return cost;
}

} // namespace dopo
