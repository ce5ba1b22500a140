#pragma once

// Classical amplitude equations and the mean-field (factorized) limit.
//   d alpha_p/dt = eps_p - gamma_p alpha_p - (chi/2) alpha_s^2
//   d alpha_s/dt = -gamma_s alpha_s + chi alpha_p conj(alpha_s)
// sigma = chi eps_p / (gamma_s gamma_p) is the threshold parameter.

#include "dopo/types.hpp"

#include <string>
#include <vector>

namespace dopo {

struct DopoParams {
    double gamma_s = 1.0;
    double gamma_p = 1.0;
    double chi = 0.0;
    double eps_p = 0.0;

    double sigma() const { return chi * eps_p / (gamma_s * gamma_p); }
    // Relative quantum-noise strength chi^2 / (gamma_p gamma_s).
    double g_squared() const { return chi * chi / (gamma_p * gamma_s); }
    void validate() const;
};

DopoParams params_from_sigma(double gamma_s, double gamma_p, double chi, double sigma);
DopoParams params_from_eps(double gamma_s, double gamma_p, double chi, double eps_p);

struct ClassicalFixedPoint {
    cxd alpha_p;
    cxd alpha_s;
    std::string branch;  // "below", "above-plus", "above-minus"
    bool stable;
    Eigen::Vector4d growth_rates;  // real parts of the 4x4 Jacobian spectrum, sorted
};

// Below-threshold point always; the two finite-amplitude points when sigma > 1.
std::vector<ClassicalFixedPoint> classical_fixed_points(const DopoParams& par);

Eigen::Matrix4d classical_jacobian(const DopoParams& par, cxd alpha_p, cxd alpha_s);

struct ClassicalPoint {
    double t;
    cxd alpha_p;
    cxd alpha_s;
};
std::vector<ClassicalPoint> classical_dynamics(const DopoParams& par, cxd alpha_p0, cxd alpha_s0,
                                               const std::vector<double>& t_grid);

// Signal fluctuation moments of the factorized theory at pump drive mu = chi <a_p>:
// n = |mu|^2 / (2(gamma_s^2 - |mu|^2)), m = gamma_s mu / (2(gamma_s^2 - |mu|^2)).
// Requires |mu| < gamma_s.
void meanfield_signal_moments(double gamma_s, cxd mu, double& n_s, cxd& m_s);

struct MeanfieldSteady {
    cxd alpha_p;   // self-consistent pump amplitude, chi*|alpha_p| < gamma_s always
    double n_s;
    cxd m_s;
    int iterations;
    double residual;  // |gamma_p a + (chi/2) m_s - eps_p|
};

// Damped fixed-point iteration (factor 0.5) on the pump amplitude, tolerance
// 1e-12, with a bisection fallback; the self-consistency function is monotone
// on (0, gamma_s/chi) so the root is unique.
MeanfieldSteady meanfield_steady(const DopoParams& par);

struct MeanfieldPoint {
    double t;
    cxd alpha_p;
    cxd m_s;
    double n_s;
};
// Factorized dynamics from (alpha_p, m_s, n_s) initial data.
std::vector<MeanfieldPoint> meanfield_dynamics(const DopoParams& par, cxd alpha_p0, cxd m_s0,
                                               double n_s0, const std::vector<double>& t_grid);

} // namespace dopo
