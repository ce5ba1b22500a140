#include "dopo/model.hpp"

#include "dopo/errors.hpp"
#include "dopo/fock.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace dopo {

namespace {

Vec product_state(const Vec& pump, const Vec& signal) {
    Vec v(pump.size() * signal.size());
    for (int p = 0; p < pump.size(); ++p)
        for (int s = 0; s < signal.size(); ++s) v(p * signal.size() + s) = pump(p) * signal(s);
    return v;
}

} // namespace

FullModel::FullModel(const DopoParams& par, int dim_p, int dim_s, cxd frame_alpha)
    : par_(par), dim_p_(dim_p), dim_s_(dim_s), frame_alpha_(frame_alpha) {
    par_.validate();
    if (dim_p < 2 || dim_s < 2) throw DimensionError("mode dimensions must be at least 2");
    a_p_ = lift_pump(annihilation(dim_p), dim_s);
    a_s_ = lift_signal(annihilation(dim_s), dim_p);
    const SpMat as2 = a_s_ * a_s_;
    const cxd nu = par_.eps_p - par_.gamma_p * frame_alpha;
    SpMat G = nu * SpMat(a_p_.adjoint()) - std::conj(nu) * a_p_;
    G += 0.5 * par_.chi * (frame_alpha * SpMat(as2.adjoint()) - std::conj(frame_alpha) * as2);
    G += 0.5 * par_.chi * (SpMat(a_p_ * SpMat(as2.adjoint())) - SpMat(SpMat(a_p_.adjoint()) * as2));
    L_ = build_liouvillian({{1.0, G}}, {{par_.gamma_p, a_p_}, {par_.gamma_s, a_s_}});
}

SpMat FullModel::drive_free_part() const {
    const SpMat as2 = a_s_ * a_s_;
    const SpMat G = 0.5 * par_.chi *
                    (SpMat(a_p_ * SpMat(as2.adjoint())) - SpMat(SpMat(a_p_.adjoint()) * as2));
    return build_liouvillian({{1.0, G}}, {{par_.gamma_p, a_p_}, {par_.gamma_s, a_s_}});
}

SpMat FullModel::raise_part() const {
    const SpMat as2 = a_s_ * a_s_;
    return commutator_superop(0.5 * par_.chi * SpMat(as2.adjoint()));
}

SpMat FullModel::lower_part() const {
    const SpMat as2 = a_s_ * a_s_;
    return commutator_superop(-0.5 * par_.chi * as2);
}

Mat FullModel::lab_vacuum() const {
    return projector(
        product_state(coherent_state(dim_p_, -frame_alpha_), fock_state(dim_s_, 0)));
}

Mat FullModel::frame_vacuum() const {
    return projector(product_state(fock_state(dim_p_, 0), fock_state(dim_s_, 0)));
}

Mat FullModel::reduce_signal(const Mat& rho) const {
    return partial_trace_pump(rho, dim_p_, dim_s_);
}

Mat FullModel::reduce_pump(const Mat& rho) const {
    return partial_trace_signal(rho, dim_p_, dim_s_);
}

ModeMoments FullModel::signal_moments(const Mat& rho) const {
    return mode_moments(reduce_signal(rho));
}

ModeMoments FullModel::pump_moments_lab(const Mat& rho) const {
    ModeMoments m = mode_moments(reduce_pump(rho));
    m.alpha += frame_alpha_;  // central moments are displacement invariant
    return m;
}

double FullModel::tail_population_pump(const Mat& rho) const {
    const Mat rp = reduce_pump(rho);
    return std::abs(rp(dim_p_ - 1, dim_p_ - 1).real());
}

double FullModel::tail_population_signal(const Mat& rho) const {
    const Mat rs = reduce_signal(rho);
    return std::abs(rs(dim_s_ - 1, dim_s_ - 1).real());
}

void FullModel::require_tails(const Mat& rho, double tol) const {
    const double tp = tail_population_pump(rho);
    if (tp > tol)
        throw TruncationError("pump population",
                              "pump tail population " + std::to_string(tp) + " exceeds " +
                                  std::to_string(tol) + " at dim_p=" + std::to_string(dim_p_));
    const double ts = tail_population_signal(rho);
    if (ts > tol)
        throw TruncationError("signal population",
                              "signal tail population " + std::to_string(ts) + " exceeds " +
                                  std::to_string(tol) + " at dim_s=" + std::to_string(dim_s_));
}

FullSteady full_steady(const DopoParams& par, const FullSteadyOptions& opt) {
    const cxd frame = opt.auto_frame ? meanfield_steady(par).alpha_p : opt.frame_alpha;
    FullModel model(par, opt.dim_p, opt.dim_s, frame);
    SteadyOptions solver = opt.solver;
    solver.check_unique = solver.check_unique && opt.compute_gap;
    const SteadyResult sr = steady_state(model.liouvillian(), model.dim(), solver);
    model.require_tails(sr.rho, opt.tail_tol);
    FullSteady out;
    out.rho = sr.rho;
    out.rho_s = model.reduce_signal(sr.rho);
    out.rho_p = model.reduce_pump(sr.rho);
    out.frame_alpha = frame;
    out.residual = sr.residual;
    out.gap = sr.gap;
    return out;
}

FullSteady full_steady_auto(const DopoParams& par, double rel_tol, int max_dim_p, int max_dim_s) {
    FullSteadyOptions opt;
    opt.dim_p = 8;
    opt.dim_s = 24;
    opt.compute_gap = false;
    opt.tail_tol = 1.0;  // tails enter the convergence loop instead of throwing
    double prev_n = -1.0, prev_g2 = -1.0, prev_ap = 0.0;
    FullSteady st;
    for (;;) {
        st = full_steady(par, opt);
        const ModeMoments sm = mode_moments(st.rho_s);
        const ModeMoments pm = [&] {
            ModeMoments m = mode_moments(st.rho_p);
            m.alpha += st.frame_alpha;
            return m;
        }();
        const double n = photon_number(st.rho_s);
        double g = -1.0;
        if (n > 1e-8) g = g2(st.rho_s);
        const double tail = std::max(std::abs(st.rho_p(opt.dim_p - 1, opt.dim_p - 1).real()),
                                     std::abs(st.rho_s(opt.dim_s - 1, opt.dim_s - 1).real()));
        bool settled = tail < 1e-8 && prev_n >= 0.0;
        std::string worst;
        if (settled) {
            if (std::abs(n - prev_n) > rel_tol * std::max(1e-6, std::abs(n))) {
                settled = false;
                worst = "signal population";
            } else if (g >= 0.0 && prev_g2 >= 0.0 &&
                       std::abs(g - prev_g2) > rel_tol * std::abs(g)) {
                settled = false;
                worst = "signal g2";
            } else if (std::abs(pm.alpha - cxd(prev_ap)) >
                       rel_tol * std::max(1e-6, std::abs(pm.alpha))) {
                settled = false;
                worst = "pump amplitude";
            }
        }
        (void)sm;
        if (settled) return st;
        prev_n = n;
        prev_g2 = g;
        prev_ap = std::abs(pm.alpha);
        if (opt.dim_p >= max_dim_p && opt.dim_s >= max_dim_s) {
            throw TruncationError(worst.empty() ? "tail population" : worst,
                                  "observable failed to settle within dim caps (" +
                                      std::to_string(max_dim_p) + ", " +
                                      std::to_string(max_dim_s) + ")");
        }
        opt.dim_p = std::min(max_dim_p, opt.dim_p + 2);
        opt.dim_s = std::min(max_dim_s, opt.dim_s + std::max(8, opt.dim_s / 3));
    }
}

std::vector<FramedState> full_dynamics(const FullModel& model, const Mat& rho0_frame,
                                       const std::vector<double>& t_grid,
                                       const EvolveConfig& cfg) {
    const std::vector<Mat> states = evolve(model.liouvillian(), rho0_frame, t_grid, cfg);
    std::vector<FramedState> out;
    out.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        out.push_back({t_grid[i], model.frame_alpha(), states[i]});
    return out;
}

std::vector<FramedState> full_dynamics_vacuum(const DopoParams& par, int dim_p, int dim_s,
                                              const std::vector<double>& t_grid,
                                              const EvolveConfig& cfg) {
    par.validate();
    FullModel model(par, dim_p, dim_s, 0.0);
    const SpMat L0 = model.drive_free_part();
    const SpMat B = model.raise_part();
    const SpMat Bc = model.lower_part();
    const double a_inf = par.eps_p / par.gamma_p;
    const double gp = par.gamma_p;
    auto path = [a_inf, gp](double t) { return cxd(a_inf * (1.0 - std::exp(-gp * t)), 0.0); };
    const std::vector<Mat> states =
        evolve_scalar_driven(L0, B, Bc, path, model.frame_vacuum(), t_grid, cfg);
    std::vector<FramedState> out;
    out.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        out.push_back({t_grid[i], path(t_grid[i]), states[i]});
    return out;
}

RhsCost measure_full_cost(const DopoParams& par, int dim_p, int dim_s, int evals) {
    FullModel model(par, dim_p, dim_s, par.eps_p / par.gamma_p);
    const SpMat& L = model.liouvillian();
    const long n = model.dim() * static_cast<long>(model.dim());
    Vec y = Vec::Constant(n, cxd(1.0 / n, 0.0));
    Vec dy(n);
    std::vector<double> times;
    times.reserve(evals);
    for (int k = 0; k < evals; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        dy.noalias() = L * y;
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    RhsCost cost;
    cost.state_bytes = static_cast<std::size_t>(n) * sizeof(cxd);
    cost.generator_bytes = static_cast<std::size_t>(L.nonZeros()) * (sizeof(cxd) + sizeof(int)) +
                           static_cast<std::size_t>(L.outerSize() + 1) * sizeof(int);
    cost.workspace_bytes = 9 * cost.state_bytes;
    cost.median_rhs_seconds = times[times.size() / 2];
    cost.evals = evals;
    return cost;
}

} // namespace dopo
