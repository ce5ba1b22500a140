#include "dopo/integrate.hpp"
#include "dopo/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dopo {

double rms_norm(const Vec& v) {
    if (v.size() == 0) return 0.0;
    return std::sqrt(v.squaredNorm() / double(v.size()));
}

namespace {

// Dormand-Prince 5(4) tableau, FSAL.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - bhat, including the FSAL stage.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

struct Stepper {
    const Rhs& f;
    const EvolveConfig& cfg;
    Vec k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, yerr;
    double dt;
    bool have_k1 = false;
    long accepted = 0;

    Stepper(const Rhs& f_, const EvolveConfig& cfg_, Eigen::Index n)
        : f(f_), cfg(cfg_), dt(cfg_.initial_dt) {
        for (Vec* v : {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &ytmp, &ynew, &yerr})
            v->resize(n);
    }

    double error_norm(const Vec& y) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            double sc = cfg.atol + cfg.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
            double r = std::abs(yerr(i)) / sc;
            acc += r * r;
        }
        return std::sqrt(acc / double(y.size()));
    }

    // One accepted step from (t, y); on return y and k1 are updated and the
    // actual step size taken is returned. dt_cap bounds the attempt (grid hits).
    double step(double& t, Vec& y, double dt_cap) {
        if (!have_k1) { f(t, y, k1); have_k1 = true; }
        long rejects = 0;
        for (;;) {
            double h = std::min({dt, dt_cap, cfg.max_dt});
            ytmp = y + h * a21 * k1;
            f(t + c2 * h, ytmp, k2);
            ytmp = y + h * (a31 * k1 + a32 * k2);
            f(t + c3 * h, ytmp, k3);
            ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            f(t + c4 * h, ytmp, k4);
            ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            f(t + c5 * h, ytmp, k5);
            ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            f(t + h, ytmp, k6);
            ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            f(t + h, ynew, k7);
            yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double err = error_norm(y);
            if (err <= 1.0 || h <= 1e-14) {
                t += h;
                y.swap(ynew);
                k1.swap(k7);
                ++accepted;
                double grow = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
                dt = h * std::clamp(grow, 0.2, 5.0);
                return h;
            }
            dt = h * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            if (++rejects > 60) throw SolverError("step size collapsed in adaptive stepper");
        }
    }
};

} // namespace

long integrate_to(const Rhs& f, Vec& y, double t0, double t1, const EvolveConfig& cfg) {
    if (t1 <= t0) return 0;
    Stepper st(f, cfg, y.size());
    double t = t0;
    long guard = 0;
    while (t < t1 - 1e-13 * std::max(1.0, std::abs(t1))) {
        st.step(t, y, t1 - t);
        if (++guard > 50'000'000) throw SolverError("step budget exhausted");
    }
    return st.accepted;
}

SteadyRun integrate_to_steady(const Rhs& f, Vec& y, double t0, const EvolveConfig& cfg,
                              const std::function<void(double, const Vec&)>& watch) {
    Stepper st(f, cfg, y.size());
    double t = t0;
    SteadyRun out;
    long guard = 0;
    for (;;) {
        st.step(t, y, cfg.max_time - t + 1e-9);
        if (watch) watch(t, y);
        // k1 holds the derivative at the current point (FSAL).
        out.residual = rms_norm(st.k1);
        if (out.residual < cfg.steady_residual) { out.converged = true; break; }
        if (t >= cfg.max_time) break;
        if (++guard > 50'000'000) throw SolverError("step budget exhausted");
    }
    out.t_end = t;
    out.steps = st.accepted;
    return out;
}

} // namespace dopo
