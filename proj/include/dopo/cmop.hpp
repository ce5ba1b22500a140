#pragma once

// Reduced signal and pump equations with self-consistent second-order
// cross-mode coupling. Both modes live in a frame where the pump is displaced
// by a fixed amplitude (normally the self-consistent factorized value), so the
// signal generator carries the frame drive mu = chi*alpha_frame and everything
// beyond mean field enters through auxiliary operators with exponential
// memory. The pump side comes in two interchangeable representations: an
// exact closed set of moment equations, and an explicit truncated density
// matrix with its own auxiliary matrices.

#include "dopo/classical.hpp"
#include "dopo/liouville.hpp"
#include "dopo/model.hpp"

#include <array>
#include <vector>

namespace dopo {

// Sparse signal-mode operators reused across right-hand sides and traces.
// The two-letter products are the fourth-moment sources for the correlation
// coefficients; left factor first, so n_a2d means (a+ a)(a+^2).
struct SignalOps {
    int dim = 0;
    SpMat a, ad, a2, a2d, n;
    SpMat n_a2d, a2_a2d, a2d_a2d, a2d_n, a2d_a2, n_a2, a2_a2, a2_n;
    explicit SignalOps(int dim);
};

// Relaxation modes of the quadratic-moment vector (<a+a>, <a^2>, <a+^2>)
// under the frame signal generator. Rates are -2g, -2g-2|mu|, -2g+2|mu| with
// closed-form spectral projectors: sum M_n = 1 and M_n M_m = delta_nm M_n.
// |mu| -> 0 collapses all three onto the first rate.
struct CorrelationDecomposition {
    double gamma_s = 0.0;
    cxd mu = 0.0;
    std::array<cxd, 3> lambda{};
    std::array<Eigen::Matrix3cd, 3> projector{};
    bool degenerate = false;
};

// Throws IllPosedFrameError unless |mu| < gamma_s.
CorrelationDecomposition correlation_decomposition(double gamma_s, cxd mu);

// Flow matrix of (<a+a>, <a^2>, <a+^2>) under the frame signal generator;
// the decomposition above diagonalizes exactly this matrix.
Eigen::Matrix3cd moment_flow_matrix(double gamma_s, cxd mu);

// Initial quadratic moments of the four one-sided fluctuation products
// delta(a+^2) rho, rho delta(a+^2), delta(a^2) rho, rho delta(a^2).
struct SourceVectors {
    Eigen::Vector3cd up, up_t, dn, dn_t;
};

SourceVectors source_vectors(const SignalOps& ops, const Mat& rho_s);
// Same moments evaluated by Gaussian factorization from (alpha, m, n); the
// two agree on Gaussian states and this form feeds the moment-only solver.
SourceVectors source_vectors_gaussian(cxd alpha, cxd m, double n);

// Per-mode coefficients of the signal correlation functions
// Tr{a+^2 exp(Ls tau) X} = sum_n d_n exp(lambda_n tau) for the four X above.
struct KernelWeights {
    std::array<cxd, 3> plus, plus_t, minus, minus_t;
};

KernelWeights kernel_weights(const CorrelationDecomposition& dec, const SourceVectors& u);

/// Equal-time source feeding the signal auxiliary operator:
// conj(m_p) [a^2, rho] - n_p [a+^2, rho] + rho a+^2 - <a+^2> rho. Traceless.
Mat equal_time_signal_source(const SignalOps& ops, cxd m_p, double n_p, const Mat& rho_s);

// Combined right-hand side of the reduced signal state and its auxiliary
// operator. mu_total = frame drive plus chi*beta with beta the frame pump
// amplitude; born_weight is (chi/2)^2 or zero.
void signal_rhs(const SignalOps& ops, double gamma_s, double gamma_p, cxd mu_frame, cxd mu_total,
                cxd m_p, double n_p, double born_weight, const Mat& rho_s, const Mat& h_s,
                Mat& drho, Mat& dh);
// Identical result, single-threaded; the reference for tests and benchmarks.
void signal_rhs_serial(const SignalOps& ops, double gamma_s, double gamma_p, cxd mu_frame,
                       cxd mu_total, cxd m_p, double n_p, double born_weight, const Mat& rho_s,
                       const Mat& h_s, Mat& drho, Mat& dh);

// Frame pump moments. alpha/m/n/c30/c21 are the amplitude and central moments
// <da da>, <da+ da>, <da^3>, <da+ da^2>; T_* are the traces of the mode-
// resolved auxiliary operators against a, a+, a^2, a+^2, a+a.
struct PumpMoments {
    cxd alpha = 0.0;
    cxd m = 0.0;
    double n = 0.0;
    cxd c30 = 0.0, c21 = 0.0;
    std::array<cxd, 3> T_a{}, T_ad{}, T_a2{}, T_ad2{}, T_n{};
};

enum class PumpBackend { moments, matrix };
enum class CmopStart { lab_vacuum, frame_vacuum };

struct CmopOptions {
    int dim_s = 64;
    PumpBackend backend = PumpBackend::moments;
    int dim_p = 12;                // matrix backend only
    bool auto_frame = true;        // displace by the self-consistent factorized amplitude
    cxd frame_alpha = 0.0;
    CmopStart start = CmopStart::lab_vacuum;
    bool born_term = true;         // off reproduces the factorized theory
    double pump_tail_tol = 1e-8;   // matrix backend truncation guard
    EvolveConfig ode;
};

struct CmopState {
    double t = 0.0;
    cxd frame_alpha = 0.0;
    Mat rho_s, h_s;
    PumpMoments pump;
    Mat rho_p;                     // matrix backend only
    std::array<Mat, 3> h_p;        // matrix backend only
};

std::vector<CmopState> cmop_dynamics(const DopoParams& par, const std::vector<double>& t_grid,
                                     const CmopOptions& opt = {});

struct CmopSteadyOptions {
    int dim_s = 64;
    bool auto_frame = true;
    cxd frame_alpha = 0.0;
    bool born_term = true;
    double tol = 1e-10;            // relative fixed-point increment
    int max_sweeps = 400;
    double theta = 0.5;            // initial damping of the sweep update
};

struct CmopSteadyResult {
    cxd frame_alpha = 0.0;
    Mat rho_s, h_s;
    PumpMoments pump;
    double residual = 0.0;         // rms of the time-local rhs at the fixed point, over gamma_s
    double increment = 0.0;        // last relative update size
    int sweeps = 0;
    bool converged = false;
};

// Damped self-consistent sweep over (signal state, auxiliary operator, pump
// moments); each sweep solves the signal stationarity equations exactly for
// the current coupling terms. Uses the moment pump representation.
CmopSteadyResult cmop_steady(const DopoParams& par, const CmopSteadyOptions& opt = {});

// Signal-only generator of the large pump-decay limit, scaled by gamma_s:
// (sigma/2)[a+^2 - a^2, .] + (g^2/4) D[a^2] + D[a].
SpMat adiabatic_liouvillian(const DopoParams& par, int dim_s);

struct AdiabaticSteady {
    Mat rho_s;
    double residual = 0.0;
    double gap = 0.0;
};
AdiabaticSteady adiabatic_steady(const DopoParams& par, int dim_s, const SteadyOptions& opt = {});

// Single-threaded cost of the reduced right-hand side (moment pump backend),
// with the same byte accounting as measure_full_cost.
RhsCost measure_cmop_cost(const DopoParams& par, int dim_s, int evals = 7);

} // namespace dopo
