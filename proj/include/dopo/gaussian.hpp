#pragma once

// Gaussian closures of the oscillator moment hierarchy, three ways:
//  - std_linearization: fluctuations linearized about the classical amplitudes
//  - gsa_full: self-consistent first and second moments of the two-mode system
//  - gsa_cmop: the same closure applied to the reduced signal/pump equations,
//    keeping the auxiliary coupling moments
// Solutions come as branches: a symmetric one (BT, alpha_s = 0) and, at strong
// enough drive, a symmetry-breaking pair (AT-plus / AT-minus).

#include "dopo/classical.hpp"
#include "dopo/cmop.hpp"
#include "dopo/wigner.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dopo {

// Gaussian value of a normally ordered fluctuation moment <da+^k da^l> with
// k + l = 3 (always zero) or k + l = 4 (pair products), from m = <da^2> and
// n = <da+ da>. Other orders throw UnsupportedMomentError.
cxd moment_factorize(int raising, int lowering, cxd m, double n);

enum class GaussianMethod { std_linearization, gsa_full, gsa_cmop };
const char* method_name(GaussianMethod m);  // "std-linearization", "gsa-full", "gsa-cmop"

// Auxiliary coupling moments retained by gsa_cmop: the traces of the signal
// auxiliary operator against (a, a+, a^2, a+^2, a+a) and of the mode-resolved
// pump auxiliary operators against (a, a+).
struct BornAux {
    std::array<cxd, 5> h_traces{};
    std::array<cxd, 3> T_a{}, T_ad{};
};

struct GaussianBranch {
    GaussianMethod method = GaussianMethod::gsa_full;
    std::string branch;            // "BT", "AT-plus", "AT-minus"
    cxd alpha_s = 0.0, alpha_p = 0.0;   // lab-frame amplitudes
    double n_s = 0.0, n_p = 0.0;        // central occupations
    cxd m_s = 0.0, m_p = 0.0;           // central squeezing moments
    std::optional<BornAux> born_aux;
    bool converged = false;
    bool diverged = false;         // below-threshold linearization at sigma >= 1
    double residual = 0.0;         // rms of the stationarity equations
};

bool gaussian_physical(double n, cxd m, double tol = 1e-8);

std::vector<GaussianBranch> std_linearization(const DopoParams& par);
std::vector<GaussianBranch> gsa_full(const DopoParams& par);
std::vector<GaussianBranch> gsa_cmop(const DopoParams& par);

const GaussianBranch* find_branch(const std::vector<GaussianBranch>& branches,
                                  const std::string& name);
// the pointer aims into `branches`, so a temporary is never acceptable there
const GaussianBranch* find_branch(std::vector<GaussianBranch>&&, const std::string&) = delete;

// Equal-weight mixture of a symmetry-breaking pair; odd moments cancel, even
// moments gain the amplitude contribution.
struct MixtureState {
    GaussianBranch plus, minus;
    double photon_number() const;            // n_s + |alpha_s|^2
    cxd second_moment() const;               // full <a^2> = m_s + alpha_s^2
    double g2() const;
    std::vector<GaussianComponent> wigner_components() const;
};

MixtureState balanced_mixture(const GaussianBranch& plus, const GaussianBranch& minus);

// Smallest sigma where the symmetry-breaking pair exists (converged and
// physical), located by bisection at fixed gamma_s, gamma_p, chi.
double at_onset_sigma(const DopoParams& base, GaussianMethod method, double sigma_hi = 4.0);

// Transient of the gsa_cmop moment system from the lab vacuum.
struct GsaCmopState {
    double t = 0.0;
    cxd frame_alpha = 0.0;
    cxd A1 = 0.0, A2 = 0.0;        // full signal <a>, <a^2> in the lab frame
    double N = 0.0;                // full signal <a+ a>
    std::array<cxd, 5> h_traces{};
    cxd alpha_p = 0.0, m_p = 0.0;  // frame pump amplitude, central moments
    double n_p = 0.0;
    std::array<cxd, 3> T_a{}, T_ad{};
};

std::vector<GsaCmopState> gsa_cmop_dynamics(const DopoParams& par,
                                            const std::vector<double>& t_grid,
                                            const EvolveConfig& cfg = {});

} // namespace dopo
