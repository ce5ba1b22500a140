#include "dopo/classical.hpp"

#include "dopo/errors.hpp"
#include "dopo/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace dopo {

void DopoParams::validate() const {
    if (!(gamma_s > 0.0) || !(gamma_p > 0.0))
        throw DimensionError("decay rates must be positive");
    if (!(chi > 0.0))
        throw DimensionError("coupling chi must be positive");
    if (eps_p < 0.0)
        throw DimensionError("drive eps_p must be non-negative");
}

DopoParams params_from_sigma(double gamma_s, double gamma_p, double chi, double sigma) {
    DopoParams par;
    par.gamma_s = gamma_s;
    par.gamma_p = gamma_p;
    par.chi = chi;
    par.eps_p = sigma * gamma_s * gamma_p / chi;
    par.validate();
    return par;
}

DopoParams params_from_eps(double gamma_s, double gamma_p, double chi, double eps_p) {
    DopoParams par;
    par.gamma_s = gamma_s;
    par.gamma_p = gamma_p;
    par.chi = chi;
    par.eps_p = eps_p;
    par.validate();
    return par;
}

Eigen::Matrix4d classical_jacobian(const DopoParams& par, cxd ap, cxd as) {
    const double xs = as.real(), ys = as.imag();
    const double xp = ap.real(), yp = ap.imag();
    const double c = par.chi;
    Eigen::Matrix4d J;
    // State ordering (Re ap, Im ap, Re as, Im as).
    J << -par.gamma_p, 0.0, -c * xs, c * ys,
         0.0, -par.gamma_p, -c * ys, -c * xs,
         c * xs, c * ys, -par.gamma_s + c * xp, c * yp,
         -c * ys, c * xs, c * yp, -par.gamma_s - c * xp;
    return J;
}

namespace {

ClassicalFixedPoint make_point(const DopoParams& par, cxd ap, cxd as, std::string branch) {
    ClassicalFixedPoint fp;
    fp.alpha_p = ap;
    fp.alpha_s = as;
    fp.branch = std::move(branch);
    const Eigen::Matrix4d J = classical_jacobian(par, ap, as);
    Eigen::EigenSolver<Eigen::Matrix4d> es(J, false);
    Eigen::Vector4d re = es.eigenvalues().real();
    std::sort(re.data(), re.data() + 4);
    fp.growth_rates = re;
    const double scale = par.gamma_s + par.gamma_p;
    fp.stable = re.maxCoeff() < -1e-10 * scale;
    return fp;
}

} // namespace

std::vector<ClassicalFixedPoint> classical_fixed_points(const DopoParams& par) {
    par.validate();
    std::vector<ClassicalFixedPoint> out;
    out.push_back(make_point(par, par.eps_p / par.gamma_p, 0.0, "below"));
    if (par.sigma() > 1.0) {
        // chi alpha_p = gamma_s pins the pump; alpha_s^2 = 2(eps_p - gamma_p gamma_s/chi)/chi.
        const cxd ap = par.gamma_s / par.chi;
        const double as2 = 2.0 * (par.eps_p - par.gamma_p * par.gamma_s / par.chi) / par.chi;
        const double as = std::sqrt(as2);
        out.push_back(make_point(par, ap, as, "above-plus"));
        out.push_back(make_point(par, ap, -as, "above-minus"));
    }
    return out;
}

std::vector<ClassicalPoint> classical_dynamics(const DopoParams& par, cxd alpha_p0, cxd alpha_s0,
                                               const std::vector<double>& t_grid) {
    par.validate();
    if (t_grid.empty()) return {};
    auto rhs = [&par](double, const Vec& y, Vec& dy) {
        const cxd ap = y(0), as = y(1);
        dy.resize(2);
        dy(0) = par.eps_p - par.gamma_p * ap - 0.5 * par.chi * as * as;
        dy(1) = -par.gamma_s * as + par.chi * ap * std::conj(as);
    };
    Vec y(2);
    y << alpha_p0, alpha_s0;
    std::vector<ClassicalPoint> out;
    out.reserve(t_grid.size());
    EvolveConfig cfg;
    double t = t_grid.front();
    if (t != 0.0) integrate_to(rhs, y, 0.0, t, cfg);
    out.push_back({t, y(0), y(1)});
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        integrate_to(rhs, y, t, t_grid[i], cfg);
        t = t_grid[i];
        out.push_back({t, y(0), y(1)});
    }
    return out;
}

void meanfield_signal_moments(double gamma_s, cxd mu, double& n_s, cxd& m_s) {
    const double mu2 = std::norm(mu);
    const double den = gamma_s * gamma_s - mu2;
    if (den <= 0.0)
        throw IllPosedFrameError("factorized signal moments require chi|alpha_p| < gamma_s");
    n_s = mu2 / (2.0 * den);
    m_s = gamma_s * mu / (2.0 * den);
}

MeanfieldSteady meanfield_steady(const DopoParams& par) {
    par.validate();
    const double cap = par.gamma_s / par.chi;
    auto pump_balance = [&par](double a) {
        // gamma_p a + (chi/2) m_s(chi a) - eps_p, strictly increasing on (0, cap)
        double n;
        cxd m;
        meanfield_signal_moments(par.gamma_s, par.chi * a, n, m);
        return par.gamma_p * a + 0.5 * par.chi * m.real() - par.eps_p;
    };
    double a = std::min(par.eps_p / par.gamma_p, 0.5 * cap);
    int it = 0;
    const int max_it = 500;
    for (; it < max_it; ++it) {
        double n;
        cxd m;
        meanfield_signal_moments(par.gamma_s, par.chi * a, n, m);
        double next = (par.eps_p - 0.5 * par.chi * m.real()) / par.gamma_p;
        next = std::clamp(next, 0.0, cap * (1.0 - 1e-12));
        const double prop = 0.5 * a + 0.5 * next;
        if (std::abs(prop - a) < 1e-12 * std::max(1.0, std::abs(a))) {
            a = prop;
            break;
        }
        a = prop;
    }
    if (it == max_it) {
        // Monotone balance function, so bisection always lands.
        double lo = 0.0, hi = cap * (1.0 - 1e-14);
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (lo + hi);
            (pump_balance(mid) > 0.0 ? hi : lo) = mid;
        }
        a = 0.5 * (lo + hi);
    }
    MeanfieldSteady out;
    out.alpha_p = a;
    meanfield_signal_moments(par.gamma_s, par.chi * a, out.n_s, out.m_s);
    out.iterations = it;
    out.residual = std::abs(pump_balance(a));
    return out;
}

std::vector<MeanfieldPoint> meanfield_dynamics(const DopoParams& par, cxd alpha_p0, cxd m_s0,
                                               double n_s0, const std::vector<double>& t_grid) {
    par.validate();
    if (t_grid.empty()) return {};
    auto rhs = [&par](double, const Vec& y, Vec& dy) {
        const cxd ap = y(0), m = y(1);
        const cxd n = y(2);  // real by construction, carried as complex for one flat state vector
        const cxd mu = par.chi * ap;
        dy.resize(3);
        dy(0) = par.eps_p - par.gamma_p * ap - 0.5 * par.chi * m;
        dy(1) = mu * (2.0 * n + 1.0) - 2.0 * par.gamma_s * m;
        dy(2) = mu * std::conj(m) + std::conj(mu) * m - 2.0 * par.gamma_s * n;
    };
    Vec y(3);
    y << alpha_p0, m_s0, cxd(n_s0, 0.0);
    std::vector<MeanfieldPoint> out;
    out.reserve(t_grid.size());
    EvolveConfig cfg;
    double t = t_grid.front();
    if (t != 0.0) integrate_to(rhs, y, 0.0, t, cfg);
    out.push_back({t, y(0), y(1), y(2).real()});
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        integrate_to(rhs, y, t, t_grid[i], cfg);
        t = t_grid[i];
        out.push_back({t, y(0), y(1), y(2).real()});
    }
    return out;
}

} // namespace dopo
