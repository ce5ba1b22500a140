#pragma once

// Run configuration and the execution modes behind the command line front
// end: steady, dynamics, sweep, wigner, compare.

#include "dopo/classical.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dopo {

enum class RunMode { steady, dynamics, sweep, wigner, compare };

enum class Method { full, cmop, meanfield, adiabatic, std_lin, gsa_full, gsa_cmop };

std::optional<Method> method_from_name(const std::string& name);
const char* method_label(Method m);
std::optional<RunMode> mode_from_name(const std::string& name);
const char* mode_label(RunMode m);

enum class OutputFormat { csv, json };

struct RunConfig {
    RunMode mode = RunMode::steady;
    std::vector<Method> methods;
    double gamma_s = 1.0, gamma_p = 1.0;   // unit rates unless overridden
    double chi = 0.1;
    std::optional<double> sigma;
    std::optional<double> eps_p;
    std::optional<int> dim_s, dim_p;
    std::optional<double> auto_trunc_tol;  // full method: grow dims to this accuracy
    bool force_dims = false;               // lifts the full-method dimension cap
    double sweep_from = 0.0, sweep_step = 0.1, sweep_to = 3.0;
    double tmax = 40.0, dt_out = 0.5;
    int jobs = 0;                          // sweep workers; 0 = logical cores
    std::string out_path;                  // empty: stdout
    OutputFormat format = OutputFormat::csv;
    std::string seed_from;                 // previous JSON steady output; reuses its frame
    std::optional<double> tol_steady;
    std::optional<double> tol_ode;
};

struct ValidatedRun {
    RunConfig cfg;
    DopoParams params;        // drive resolved at the configured sigma
    int dim_s = 0, dim_p = 0;
    cxd frame_seed = 0.0;
    bool have_frame_seed = false;
};

// Fills defaults, resolves sigma against eps_p, checks the method list per
// mode and the full-method dimension cap. Throws DimensionError on anything
// contradictory; the message lists every problem found.
ValidatedRun validate(const RunConfig& raw);

// Executes the run and writes its artifact. Exit code contract: 0 success,
// 2 bad configuration, 3 solver failure, 4 truncation failure.
int run(const RunConfig& cfg);

} // namespace dopo
