#include "CLI11.hpp"

#include "dopo/run.hpp"
#include "dopo/version.hpp"

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct CliState {
    dopo::RunConfig cfg;
    std::vector<std::string> method_names;
    std::string format = "csv";
    std::string sweep_range;
};

void add_shared(CLI::App* sub, CliState& st, bool scalar_sigma) {
    // lets --config (a parent option) appear after the subcommand name
    sub->fallthrough();
    sub->add_option("--gamma-s", st.cfg.gamma_s, "signal loss rate")->capture_default_str();
    sub->add_option("--gamma-p", st.cfg.gamma_p, "pump loss rate")->capture_default_str();
    sub->add_option("--chi", st.cfg.chi, "two-photon coupling")->capture_default_str();
    if (scalar_sigma)
        sub->add_option("--sigma", st.cfg.sigma, "drive in threshold units, chi*eps_p/(gamma_s*gamma_p)");
    sub->add_option("--eps-p", st.cfg.eps_p, "pump drive amplitude");
    sub->add_option("--ds", st.cfg.dim_s, "signal truncation");
    sub->add_option("--dp", st.cfg.dim_p, "pump truncation");
    sub->add_option("--auto-trunc", st.cfg.auto_trunc_tol,
                    "grow truncations until observables settle to this relative tolerance");
    sub->add_flag("--force-dims", st.cfg.force_dims, "accept truncations past the size guard");
    sub->add_option("-m,--method,--methods", st.method_names, "solver methods, comma separated")
        ->delimiter(',');
    sub->add_option("-o,--out", st.cfg.out_path, "output path (default stdout)");
    sub->add_option("--format", st.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--jobs", st.cfg.jobs, "worker threads for sweeps");
    sub->add_option("--seed-from", st.cfg.seed_from, "JSON output of a previous run; reuses its frame");
    sub->add_option("--tol-steady", st.cfg.tol_steady, "steady-state residual tolerance");
    sub->add_option("--tol-ode", st.cfg.tol_ode, "integrator relative tolerance");
}

} // namespace

int main(int argc, char** argv) {
    CliState st;
    CLI::App app{"degenerate parametric oscillator toolbox"};
    app.set_version_flag("--version", dopo::kVersion);
    app.set_config("--config", "", "read options from an INI-style file; flags win");
    app.require_subcommand(1);

    CLI::App* steady = app.add_subcommand("steady", "steady-state observables per method");
    add_shared(steady, st, true);

    CLI::App* dynamics = app.add_subcommand("dynamics", "photon number and g2 time series");
    add_shared(dynamics, st, true);
    dynamics->add_option("--tmax", st.cfg.tmax, "final time")->capture_default_str();
    dynamics->add_option("--dt-out", st.cfg.dt_out, "output spacing")->capture_default_str();

    CLI::App* sweep = app.add_subcommand("sweep", "steady-state scan over the drive");
    add_shared(sweep, st, false);
    sweep->add_option("--sigma", st.sweep_range, "drive range as from:step:to")->required();

    CLI::App* wigner = app.add_subcommand("wigner", "steady-state Wigner function of the signal");
    add_shared(wigner, st, true);

    CLI::App* compare = app.add_subcommand("compare", "steady rows plus pairwise differences");
    add_shared(compare, st, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (steady->parsed()) st.cfg.mode = dopo::RunMode::steady;
    if (dynamics->parsed()) st.cfg.mode = dopo::RunMode::dynamics;
    if (sweep->parsed()) st.cfg.mode = dopo::RunMode::sweep;
    if (wigner->parsed()) st.cfg.mode = dopo::RunMode::wigner;
    if (compare->parsed()) st.cfg.mode = dopo::RunMode::compare;

    if (sweep->parsed()) {
        double a = 0.0, b = 0.0, c = 0.0;
        if (std::sscanf(st.sweep_range.c_str(), "%lf:%lf:%lf", &a, &b, &c) != 3) {
            std::cerr << "config error: sweep range must look like 0:0.1:3\n";
            return 2;
        }
        st.cfg.sweep_from = a;
        st.cfg.sweep_step = b;
        st.cfg.sweep_to = c;
    }

    for (const std::string& name : st.method_names) {
        const auto m = dopo::method_from_name(name);
        if (!m) {
            std::cerr << "config error: unknown method '" << name
                      << "' (know full, cmop, meanfield, adiabatic, std-lin, gsa-full, gsa-cmop)\n";
            return 2;
        }
        st.cfg.methods.push_back(*m);
    }
    st.cfg.format = st.format == "json" ? dopo::OutputFormat::json : dopo::OutputFormat::csv;

    return dopo::run(st.cfg);
}
