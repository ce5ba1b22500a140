#pragma once

// Full two-mode master equation on a truncated Fock space, expressed in a
// pump-displaced frame. With displacement alpha the generator reads
//   d rho/dt = [nu a_p+ - conj(nu) a_p
//               + (chi/2)(alpha a_s+^2 - conj(alpha) a_s^2)
//               + (chi/2)(a_p a_s+^2 - a_p+ a_s^2), rho]
//              + gamma_p D[a_p] rho + gamma_s D[a_s] rho,   nu = eps_p - gamma_p alpha.
// alpha = 0 recovers the lab frame; displacing by the self-consistent pump
// amplitude keeps the truncated pump ladder short.

#include "dopo/classical.hpp"
#include "dopo/liouville.hpp"
#include "dopo/observables.hpp"

#include <cstddef>
#include <vector>

namespace dopo {

class FullModel {
public:
    FullModel(const DopoParams& par, int dim_p, int dim_s, cxd frame_alpha = 0.0);

    const DopoParams& params() const { return par_; }
    int dim_p() const { return dim_p_; }
    int dim_s() const { return dim_s_; }
    int dim() const { return dim_p_ * dim_s_; }
    cxd frame_alpha() const { return frame_alpha_; }

    const SpMat& liouvillian() const { return L_; }

    // Split L(t) = L0 + f(t) B + conj(f(t)) Bc for a frame whose displacement
    // follows a path f(t); the pump drive term is absent from L0 because a
    // path obeying df/dt = eps_p - gamma_p f cancels it exactly.
    SpMat drive_free_part() const;
    SpMat raise_part() const;   // B  = (chi/2) [a_s+^2, .]
    SpMat lower_part() const;   // Bc = -(chi/2) [a_s^2, .]

    Mat lab_vacuum() const;     // lab vacuum seen from this frame
    Mat frame_vacuum() const;

    Mat reduce_signal(const Mat& rho) const;
    Mat reduce_pump(const Mat& rho) const;   // stays in the displaced frame

    ModeMoments signal_moments(const Mat& rho) const;
    ModeMoments pump_moments_lab(const Mat& rho) const;  // amplitude shifted back to the lab

    double tail_population_pump(const Mat& rho) const;
    double tail_population_signal(const Mat& rho) const;
    void require_tails(const Mat& rho, double tol) const;

private:
    DopoParams par_;
    int dim_p_, dim_s_;
    cxd frame_alpha_;
    SpMat a_p_, a_s_;  // lifted to the composite space
    SpMat L_;
};

struct FullSteady {
    Mat rho;           // composite state in the frame
    Mat rho_s;
    Mat rho_p;         // frame pump state
    cxd frame_alpha;
    double residual;
    double gap;        // slowest relaxation rate of the truncated generator
};

struct FullSteadyOptions {
    int dim_p = 10;
    int dim_s = 32;
    bool auto_frame = true;   // displace by the self-consistent factorized amplitude
    cxd frame_alpha = 0.0;
    bool compute_gap = true;
    double tail_tol = 1e-6;
    SteadyOptions solver;
};

FullSteady full_steady(const DopoParams& par, const FullSteadyOptions& opt = {});

// Grow the truncation until signal population, pump amplitude, and (where
// defined) the signal g2 all settle to rel_tol; throws TruncationError naming
// the observable that failed to converge within the dimension caps.
FullSteady full_steady_auto(const DopoParams& par, double rel_tol = 1e-3, int max_dim_p = 20,
                            int max_dim_s = 256);

struct FramedState {
    double t;
    cxd frame_alpha;
    Mat rho;
};

std::vector<FramedState> full_dynamics(const FullModel& model, const Mat& rho0_frame,
                                       const std::vector<double>& t_grid,
                                       const EvolveConfig& cfg = {});

// Transient from the lab vacuum in a frame riding the drive-only classical pump
// path alpha(t) = (eps_p/gamma_p)(1 - exp(-gamma_p t)). The pump ladder then
// only has to hold fluctuations and depletion, not the coherent excursion.
std::vector<FramedState> full_dynamics_vacuum(const DopoParams& par, int dim_p, int dim_s,
                                              const std::vector<double>& t_grid,
                                              const EvolveConfig& cfg = {});

struct RhsCost {
    std::size_t state_bytes = 0;
    std::size_t generator_bytes = 0;
    std::size_t workspace_bytes = 0;   // integrator scratch: 9 state-sized vectors
    double median_rhs_seconds = 0.0;
    long evals = 0;
    std::size_t peak_bytes() const { return state_bytes + generator_bytes + workspace_bytes; }
};

// Single-threaded timing of the vectorized generator applied to a dense state.
RhsCost measure_full_cost(const DopoParams& par, int dim_p, int dim_s, int evals = 7);

} // namespace dopo
