#include "dopo/run.hpp"

#include "dopo/cmop.hpp"
#include "dopo/errors.hpp"
#include "dopo/fock.hpp"
#include "dopo/gaussian.hpp"
#include "dopo/liouville.hpp"
#include "dopo/model.hpp"
#include "dopo/observables.hpp"
#include "dopo/output.hpp"
#include "dopo/version.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

namespace dopo {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double g2_or_nan(const Mat& rho_s) {
    try {
        return g2(rho_s);
    } catch (const UndefinedObservableError&) {
        return kNan;
    }
}

double g2_gauss_or_nan(cxd alpha, cxd m, double n) {
    if (n + std::norm(alpha) <= 1e-12) return kNan;
    return g2_gaussian(alpha, m, n);
}

struct SteadyRow {
    double n = kNan, g2v = kNan;
    cxd chi_ap = 0.0;
    double min_eig = kNan;
    double residual = kNan;
    int dim_p = 0, dim_s = 0;
    cxd frame = 0.0;
    bool has_frame = false;
};

struct Headline {
    bool have = false;
    bool mixture = false;
    GaussianBranch plus, minus, bt;
};

// AT pair as a balanced mixture when it exists and the amplitude dominates
// the fluctuations; the symmetric branch otherwise.
Headline select_headline(const std::vector<GaussianBranch>& branches) {
    Headline h;
    const GaussianBranch* bt = find_branch(branches, "BT");
    const GaussianBranch* p = find_branch(branches, "AT-plus");
    const GaussianBranch* m = find_branch(branches, "AT-minus");
    if (p && m && p->converged && m->converged && std::norm(p->alpha_s) > p->n_s) {
        h.have = true;
        h.mixture = true;
        h.plus = *p;
        h.minus = *m;
    } else if (bt) {
        h.have = true;
        h.bt = *bt;
    }
    return h;
}

SteadyRow gaussian_row(Method method, const DopoParams& par) {
    const std::vector<GaussianBranch> br = method == Method::std_lin ? std_linearization(par)
        : method == Method::gsa_full                                 ? gsa_full(par)
                                                                     : gsa_cmop(par);
    SteadyRow r;
    const Headline h = select_headline(br);
    if (!h.have) return r;
    if (h.mixture) {
        const MixtureState mix = balanced_mixture(h.plus, h.minus);
        r.n = mix.photon_number();
        r.g2v = mix.g2();
        r.chi_ap = par.chi * h.plus.alpha_p;
        r.residual = h.plus.residual;
    } else {
        r.n = h.bt.n_s;
        r.g2v = g2_gauss_or_nan(h.bt.alpha_s, h.bt.m_s, h.bt.n_s);
        r.chi_ap = par.chi * h.bt.alpha_p;
        r.residual = h.bt.residual;
    }
    return r;
}

SteadyRow steady_row(Method m, const ValidatedRun& v, const DopoParams& par) {
    SteadyRow r;
    switch (m) {
        case Method::full: {
            FullSteady fs;
            if (v.cfg.auto_trunc_tol) {
                fs = full_steady_auto(par, *v.cfg.auto_trunc_tol);
            } else {
                FullSteadyOptions o;
                o.dim_p = v.dim_p;
                o.dim_s = v.dim_s;
                fs = full_steady(par, o);
            }
            r.n = photon_number(fs.rho_s);
            r.g2v = g2_or_nan(fs.rho_s);
            r.chi_ap = par.chi * (mode_moments(fs.rho_p).alpha + fs.frame_alpha);
            r.min_eig = min_eigenvalue(fs.rho_s);
            r.residual = fs.residual;
            r.dim_p = static_cast<int>(fs.rho_p.rows());
            r.dim_s = static_cast<int>(fs.rho_s.rows());
            break;
        }
        case Method::cmop: {
            CmopSteadyOptions o;
            o.dim_s = v.dim_s;
            if (v.cfg.tol_steady) o.tol = *v.cfg.tol_steady;
            if (v.have_frame_seed) {
                o.auto_frame = false;
                o.frame_alpha = v.frame_seed;
            }
            const CmopSteadyResult cs = cmop_steady(par, o);
            r.n = photon_number(cs.rho_s);
            r.g2v = g2_or_nan(cs.rho_s);
            r.chi_ap = par.chi * (cs.frame_alpha + cs.pump.alpha);
            r.min_eig = min_eigenvalue(cs.rho_s);
            r.residual = cs.residual;
            r.dim_s = v.dim_s;
            r.frame = cs.frame_alpha;
            r.has_frame = true;
            break;
        }
        case Method::meanfield: {
            const MeanfieldSteady mf = meanfield_steady(par);
            r.n = mf.n_s;
            r.g2v = g2_gauss_or_nan(0.0, mf.m_s, mf.n_s);
            r.chi_ap = par.chi * mf.alpha_p;
            r.residual = mf.residual;
            break;
        }
        case Method::adiabatic: {
            const AdiabaticSteady ad = adiabatic_steady(par, v.dim_s);
            r.n = photon_number(ad.rho_s);
            r.g2v = g2_or_nan(ad.rho_s);
            const ModeMoments mm = mode_moments(ad.rho_s);
            const cxd a2 = mm.m + mm.alpha * mm.alpha;
            // pump slaved to the signal in this limit
            r.chi_ap = par.chi * (par.eps_p - 0.5 * par.chi * a2) / par.gamma_p;
            r.min_eig = min_eigenvalue(ad.rho_s);
            r.residual = ad.residual;
            r.dim_s = v.dim_s;
            break;
        }
        default:
            r = gaussian_row(m, par);
            break;
    }
    return r;
}

double reldiff(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b)) return kNan;
    return std::abs(a - b) / std::max(std::abs(b), 1e-12);
}

std::vector<double> time_grid(double tmax, double dt) {
    std::vector<double> g;
    for (double t = 0.0; t < tmax + 0.5 * dt; t += dt) g.push_back(std::min(t, tmax));
    if (g.back() < tmax) g.push_back(tmax);
    return g;
}

std::vector<double> sweep_grid(const RunConfig& cfg) {
    std::vector<double> g;
    const int n = static_cast<int>(std::floor((cfg.sweep_to - cfg.sweep_from) / cfg.sweep_step + 1.5));
    for (int i = 0; i < n; ++i) {
        const double s = cfg.sweep_from + i * cfg.sweep_step;
        if (s > cfg.sweep_to + 1e-12) break;
        g.push_back(std::min(s, cfg.sweep_to));
    }
    return g;
}

EvolveConfig ode_config(const ValidatedRun& v) {
    EvolveConfig c;
    if (v.cfg.tol_ode) {
        c.rtol = *v.cfg.tol_ode;
        c.atol = 0.01 * c.rtol;
    }
    if (v.cfg.tol_steady) c.steady_residual = *v.cfg.tol_steady;
    return c;
}

Table steady_table(const ValidatedRun& v, RunMeta& meta) {
    Table t;
    t.label_column = "method";
    t.columns = {"sigma", "n_s", "g2", "chi_ap_re", "chi_ap_im", "min_eig",
                 "residual", "dim_p", "dim_s"};
    for (Method m : v.cfg.methods) {
        const SteadyRow r = steady_row(m, v, v.params);
        t.labels.push_back(method_label(m));
        t.rows.push_back({v.params.sigma(), r.n, r.g2v, r.chi_ap.real(), r.chi_ap.imag(),
                          r.min_eig, r.residual, static_cast<double>(r.dim_p),
                          static_cast<double>(r.dim_s)});
        if (r.has_frame)
            meta.entries.push_back({"frame_alpha", format_value(r.frame.real()) + " "
                                                       + format_value(r.frame.imag())});
    }
    return t;
}

Table compare_table(const ValidatedRun& v, RunMeta& meta) {
    Table t = steady_table(v, meta);
    t.columns.push_back("reldiff_n");
    t.columns.push_back("reldiff_g2");
    const std::vector<double> base = t.rows.at(0);
    for (auto& row : t.rows) {
        row.push_back(reldiff(row[1], base[1]));
        row.push_back(reldiff(row[2], base[2]));
    }
    return t;
}

Table sweep_table(const ValidatedRun& v) {
    const std::vector<double> sigmas = sweep_grid(v.cfg);
    const std::size_t npts = sigmas.size();
    struct Point {
        std::vector<SteadyRow> rows;
        std::exception_ptr err;
    };
    std::vector<Point> pts(npts);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= npts) return;
            try {
                const DopoParams par = params_from_sigma(v.params.gamma_s, v.params.gamma_p,
                                                         v.params.chi, sigmas[i]);
                for (Method m : v.cfg.methods) pts[i].rows.push_back(steady_row(m, v, par));
            } catch (...) {
                pts[i].err = std::current_exception();
            }
        }
    };
    std::size_t jobs = v.cfg.jobs > 0 ? static_cast<std::size_t>(v.cfg.jobs)
                                      : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, npts);
    if (jobs <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < jobs; ++k) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (const auto& p : pts)
        if (p.err) std::rethrow_exception(p.err);

    Table t;
    t.columns = {"sigma"};
    for (Method m : v.cfg.methods) {
        const std::string l = method_label(m);
        t.columns.push_back("n_" + l);
        t.columns.push_back("g2_" + l);
        t.columns.push_back("chi_ap_abs_" + l);
    }
    for (std::size_t k = 1; k < v.cfg.methods.size(); ++k) {
        const std::string l = method_label(v.cfg.methods[k]);
        t.columns.push_back("reldiff_n_" + l);
        t.columns.push_back("reldiff_g2_" + l);
    }
    t.columns.push_back("dim_p");
    t.columns.push_back("dim_s");
    for (std::size_t i = 0; i < npts; ++i) {
        std::vector<double> row{sigmas[i]};
        for (const SteadyRow& r : pts[i].rows) {
            row.push_back(r.n);
            row.push_back(r.g2v);
            row.push_back(std::abs(r.chi_ap));
        }
        for (std::size_t k = 1; k < pts[i].rows.size(); ++k) {
            row.push_back(reldiff(pts[i].rows[k].n, pts[i].rows[0].n));
            row.push_back(reldiff(pts[i].rows[k].g2v, pts[i].rows[0].g2v));
        }
        int dp = 0, ds = 0;
        for (const SteadyRow& r : pts[i].rows) {
            dp = std::max(dp, r.dim_p);
            ds = std::max(ds, r.dim_s);
        }
        row.push_back(dp);
        row.push_back(ds);
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table dynamics_table(const ValidatedRun& v) {
    const std::vector<double> grid = time_grid(v.cfg.tmax, v.cfg.dt_out);
    const std::size_t npts = grid.size();
    const EvolveConfig ode = ode_config(v);
    Table t;
    t.columns = {"t"};
    std::vector<std::vector<double>> ncols, gcols;
    for (Method m : v.cfg.methods) {
        std::vector<double> nn(npts, kNan), gg(npts, kNan);
        switch (m) {
            case Method::full: {
                const auto traj = full_dynamics_vacuum(v.params, v.dim_p, v.dim_s, grid, ode);
                for (std::size_t i = 0; i < npts; ++i) {
                    const Mat rho_s = partial_trace_pump(traj[i].rho, v.dim_p, v.dim_s);
                    nn[i] = photon_number(rho_s);
                    gg[i] = g2_or_nan(rho_s);
                }
                break;
            }
            case Method::cmop: {
                CmopOptions o;
                o.dim_s = v.dim_s;
                o.ode = ode;
                const auto traj = cmop_dynamics(v.params, grid, o);
                for (std::size_t i = 0; i < npts; ++i) {
                    nn[i] = photon_number(traj[i].rho_s);
                    gg[i] = g2_or_nan(traj[i].rho_s);
                }
                break;
            }
            case Method::meanfield: {
                const auto traj = meanfield_dynamics(v.params, 0.0, 0.0, 0.0, grid);
                for (std::size_t i = 0; i < npts; ++i) {
                    nn[i] = traj[i].n_s;
                    gg[i] = g2_gauss_or_nan(0.0, traj[i].m_s, traj[i].n_s);
                }
                break;
            }
            case Method::gsa_cmop: {
                const auto traj = gsa_cmop_dynamics(v.params, grid, ode);
                for (std::size_t i = 0; i < npts; ++i) {
                    const cxd a1 = traj[i].A1;
                    nn[i] = traj[i].N;
                    gg[i] = g2_gauss_or_nan(a1, traj[i].A2 - a1 * a1,
                                            traj[i].N - std::norm(a1));
                }
                break;
            }
            case Method::adiabatic: {
                const SpMat L = adiabatic_liouvillian(v.params, v.dim_s);
                Mat rho0 = Mat::Zero(v.dim_s, v.dim_s);
                rho0(0, 0) = 1.0;
                const auto traj = evolve(L, rho0, grid, ode);
                for (std::size_t i = 0; i < npts; ++i) {
                    nn[i] = photon_number(traj[i]);
                    gg[i] = g2_or_nan(traj[i]);
                }
                break;
            }
            default:
                break;  // rejected by validate
        }
        const std::string l = method_label(m);
        t.columns.push_back("n_" + l);
        t.columns.push_back("g2_" + l);
        ncols.push_back(std::move(nn));
        gcols.push_back(std::move(gg));
    }
    for (std::size_t i = 0; i < npts; ++i) {
        std::vector<double> row{grid[i]};
        for (std::size_t k = 0; k < ncols.size(); ++k) {
            row.push_back(ncols[k][i]);
            row.push_back(gcols[k][i]);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

WignerGrid wigner_artifact(const ValidatedRun& v, RunMeta& meta) {
    const Method m = v.cfg.methods.at(0);
    if (m == Method::full || m == Method::cmop || m == Method::adiabatic) {
        Mat rho_s;
        if (m == Method::full) {
            FullSteadyOptions o;
            o.dim_p = v.dim_p;
            o.dim_s = v.dim_s;
            rho_s = full_steady(v.params, o).rho_s;
        } else if (m == Method::cmop) {
            CmopSteadyOptions o;
            o.dim_s = v.dim_s;
            if (v.cfg.tol_steady) o.tol = *v.cfg.tol_steady;
            rho_s = cmop_steady(v.params, o).rho_s;
        } else {
            rho_s = adiabatic_steady(v.params, v.dim_s).rho_s;
        }
        const RVec ax = default_axis(rho_s);
        WignerGrid g = wigner_from_rho(rho_s, ax, ax);
        meta.entries.push_back({"wigner_integral", format_value(grid_integral(g))});
        return g;
    }
    const std::vector<GaussianBranch> br = m == Method::std_lin ? std_linearization(v.params)
        : m == Method::gsa_full                                 ? gsa_full(v.params)
                                                                : gsa_cmop(v.params);
    const Headline h = select_headline(br);
    if (!h.have || (!h.mixture && h.bt.diverged))
        throw SolverError("no finite Gaussian branch to plot at this drive");
    std::vector<GaussianComponent> parts;
    if (h.mixture) {
        parts = balanced_mixture(h.plus, h.minus).wigner_components();
    } else {
        parts = {{1.0, h.bt.alpha_s, h.bt.m_s, h.bt.n_s}};
    }
    double r2 = 0.0;
    for (const auto& c : parts) {
        const double vx = 1.0 + 2.0 * c.n + 2.0 * c.m.real();
        const double vp = 1.0 + 2.0 * c.n - 2.0 * c.m.real();
        const double mx = 2.0 * c.alpha.real(), mp = 2.0 * c.alpha.imag();
        r2 = std::max({r2, vx + mx * mx, vp + mp * mp});
    }
    const double half = std::max(5.0, 4.0 * std::sqrt(r2));
    const RVec ax = RVec::LinSpaced(201, -half, half);
    WignerGrid g = wigner_from_gaussian_mixture(parts, ax, ax);
    meta.entries.push_back({"wigner_integral", format_value(grid_integral(g))});
    return g;
}

RunMeta base_meta(const ValidatedRun& v) {
    RunMeta meta;
    auto add = [&](const std::string& k, const std::string& val) {
        meta.entries.push_back({k, val});
    };
    add("version", kVersion);
    add("mode", mode_label(v.cfg.mode));
    std::string ms;
    for (Method m : v.cfg.methods) {
        if (!ms.empty()) ms += ",";
        ms += method_label(m);
    }
    add("methods", ms);
    add("gamma_s", format_value(v.params.gamma_s));
    add("gamma_p", format_value(v.params.gamma_p));
    add("chi", format_value(v.params.chi));
    add("eps_p", format_value(v.params.eps_p));
    add("sigma", format_value(v.params.sigma()));
    add("dim_s", std::to_string(v.dim_s));
    add("dim_p", std::to_string(v.dim_p));
    const EvolveConfig ode = ode_config(v);
    add("tol_ode", format_value(ode.rtol));
    add("tol_steady", format_value(v.cfg.tol_steady.value_or(1e-10)));
    if (v.cfg.mode == RunMode::sweep) {
        add("sweep", format_value(v.cfg.sweep_from) + ":" + format_value(v.cfg.sweep_step)
                         + ":" + format_value(v.cfg.sweep_to));
        add("jobs", std::to_string(v.cfg.jobs));
    }
    if (v.cfg.mode == RunMode::dynamics) {
        add("tmax", format_value(v.cfg.tmax));
        add("dt_out", format_value(v.cfg.dt_out));
    }
    return meta;
}

} // namespace

std::optional<Method> method_from_name(const std::string& name) {
    if (name == "full") return Method::full;
    if (name == "cmop") return Method::cmop;
    if (name == "meanfield") return Method::meanfield;
    if (name == "adiabatic") return Method::adiabatic;
    if (name == "std-lin") return Method::std_lin;
    if (name == "gsa-full") return Method::gsa_full;
    if (name == "gsa-cmop") return Method::gsa_cmop;
    return std::nullopt;
}

const char* method_label(Method m) {
    switch (m) {
        case Method::full: return "full";
        case Method::cmop: return "cmop";
        case Method::meanfield: return "meanfield";
        case Method::adiabatic: return "adiabatic";
        case Method::std_lin: return "std-lin";
        case Method::gsa_full: return "gsa-full";
        case Method::gsa_cmop: return "gsa-cmop";
    }
    return "?";
}

std::optional<RunMode> mode_from_name(const std::string& name) {
    if (name == "steady") return RunMode::steady;
    if (name == "dynamics") return RunMode::dynamics;
    if (name == "sweep") return RunMode::sweep;
    if (name == "wigner") return RunMode::wigner;
    if (name == "compare") return RunMode::compare;
    return std::nullopt;
}

const char* mode_label(RunMode m) {
    switch (m) {
        case RunMode::steady: return "steady";
        case RunMode::dynamics: return "dynamics";
        case RunMode::sweep: return "sweep";
        case RunMode::wigner: return "wigner";
        case RunMode::compare: return "compare";
    }
    return "?";
}

ValidatedRun validate(const RunConfig& raw) {
    ValidatedRun v;
    v.cfg = raw;
    std::vector<std::string> errs;

    std::vector<Method> ms;
    for (Method m : raw.methods)
        if (std::find(ms.begin(), ms.end(), m) == ms.end()) ms.push_back(m);
    v.cfg.methods = ms;
    if (ms.empty()) errs.push_back("no methods selected");
    if (raw.mode == RunMode::compare && ms.size() < 2)
        errs.push_back("compare needs at least two methods");
    if (raw.mode == RunMode::wigner && ms.size() != 1)
        errs.push_back("wigner takes exactly one method");
    if (raw.mode == RunMode::dynamics)
        for (Method m : ms)
            if (m == Method::std_lin || m == Method::gsa_full)
                errs.push_back(std::string(method_label(m)) + " has no transient solver");

    if (raw.gamma_s <= 0.0 || raw.gamma_p <= 0.0 || raw.chi <= 0.0)
        errs.push_back("gamma-s, gamma-p and chi must be positive");

    double sigma = 0.0;
    if (raw.sigma && raw.eps_p) {
        const double implied = raw.chi * *raw.eps_p / (raw.gamma_s * raw.gamma_p);
        if (std::abs(implied - *raw.sigma) > 1e-9 * std::max(1.0, std::abs(*raw.sigma)))
            errs.push_back("sigma and eps-p disagree (eps-p implies sigma="
                           + format_value(implied) + ")");
        sigma = *raw.sigma;
    } else if (raw.sigma) {
        sigma = *raw.sigma;
    } else if (raw.eps_p && raw.gamma_s > 0.0 && raw.gamma_p > 0.0) {
        sigma = raw.chi * *raw.eps_p / (raw.gamma_s * raw.gamma_p);
    }
    if (sigma < 0.0) errs.push_back("sigma must be non-negative");

    if (raw.mode == RunMode::sweep) {
        if (raw.sweep_step <= 0.0) errs.push_back("sweep step must be positive");
        if (raw.sweep_to < raw.sweep_from) errs.push_back("sweep range is empty");
        if (raw.sweep_from < 0.0) errs.push_back("sweep start must be non-negative");
        sigma = std::max(0.0, raw.sweep_from);
    }
    if (raw.mode == RunMode::dynamics && (raw.tmax <= 0.0 || raw.dt_out <= 0.0))
        errs.push_back("tmax and dt-out must be positive");
    if (raw.jobs < 0) errs.push_back("jobs must be non-negative");
    if (raw.tol_steady && *raw.tol_steady <= 0.0) errs.push_back("tol-steady must be positive");
    if (raw.tol_ode && *raw.tol_ode <= 0.0) errs.push_back("tol-ode must be positive");
    if (raw.auto_trunc_tol && *raw.auto_trunc_tol <= 0.0)
        errs.push_back("auto-trunc tolerance must be positive");

    v.dim_s = raw.dim_s.value_or(64);
    v.dim_p = raw.dim_p.value_or(10);
    if (v.dim_s < 3 || v.dim_p < 2) errs.push_back("truncations too small (need ds >= 3, dp >= 2)");

    const bool has_full = std::find(ms.begin(), ms.end(), Method::full) != ms.end();
    if (has_full && !raw.force_dims && !raw.auto_trunc_tol) {
        const long n = static_cast<long>(v.dim_s) * v.dim_p;
        if (n > 2500) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "full master equation at dim_p*dim_s = %ld acts on (dim_p*dim_s)^2 = "
                          "%.3g matrix entries (%.0f MB per state); pass --force-dims to accept",
                          n, static_cast<double>(n) * n, static_cast<double>(n) * n * 16 / 1048576.0);
            errs.push_back(buf);
        }
    }

    if (!raw.seed_from.empty()) {
        std::ifstream is(raw.seed_from);
        if (!is) {
            errs.push_back("cannot read seed file " + raw.seed_from);
        } else {
            try {
                nlohmann::json j;
                is >> j;
                const std::string fa = j.at("meta").at("frame_alpha").get<std::string>();
                double re = 0.0, im = 0.0;
                if (std::sscanf(fa.c_str(), "%lf %lf", &re, &im) != 2)
                    throw std::runtime_error("bad frame_alpha entry");
                v.frame_seed = {re, im};
                v.have_frame_seed = true;
            } catch (const std::exception& e) {
                errs.push_back("seed file " + raw.seed_from + " has no usable frame ("
                               + e.what() + ")");
            }
        }
    }

    if (!errs.empty()) {
        std::string msg;
        for (const auto& e : errs) {
            if (!msg.empty()) msg += "; ";
            msg += e;
        }
        throw DimensionError(msg);
    }
    v.params = params_from_sigma(raw.gamma_s, raw.gamma_p, raw.chi, sigma);
    return v;
}

int run(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ValidatedRun v;
    try {
        v = validate(cfg);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        RunMeta meta = base_meta(v);
        const bool binary_wigner = v.cfg.mode == RunMode::wigner && !v.cfg.out_path.empty()
            && v.cfg.out_path.size() > 4
            && v.cfg.out_path.compare(v.cfg.out_path.size() - 4, 4, ".bin") == 0;

        WignerGrid wgrid;
        Table table;
        if (v.cfg.mode == RunMode::wigner) {
            wgrid = wigner_artifact(v, meta);
        } else if (v.cfg.mode == RunMode::steady) {
            table = steady_table(v, meta);
        } else if (v.cfg.mode == RunMode::compare) {
            table = compare_table(v, meta);
        } else if (v.cfg.mode == RunMode::sweep) {
            table = sweep_table(v);
        } else {
            table = dynamics_table(v);
        }
        meta.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::ofstream file;
        std::ostream* os = &std::cout;
        if (!v.cfg.out_path.empty() && !binary_wigner) {
            file.open(v.cfg.out_path);
            if (!file) throw SolverError("cannot open " + v.cfg.out_path + " for writing");
            os = &file;
        }
        if (v.cfg.mode == RunMode::wigner) {
            if (binary_wigner)
                write_wigner_binary(v.cfg.out_path, wgrid);
            else
                write_wigner_csv(*os, meta, wgrid);
        } else if (v.cfg.format == OutputFormat::json) {
            write_json(*os, meta, table);
        } else {
            write_csv(*os, meta, table);
        }
        return 0;
    } catch (const TruncationError& e) {
        std::cerr << "truncation failure: " << e.what() << "\n";
        return 4;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    }
}

} // namespace dopo
