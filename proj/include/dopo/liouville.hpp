#pragma once

// Vectorized superoperators. Column-major vec throughout: vec(A rho B) =
// (B^T (x) A) vec(rho). Generator terms use plain commutators: a term (c, G)
// contributes c*[G, rho]; any phase factors belong in c or G at the call site.

#include "dopo/types.hpp"
#include "dopo/integrate.hpp"

#include <utility>
#include <vector>

namespace dopo {

Vec vec_of(const Mat& m);
Mat unvec(const Vec& v, int dim);

// (1 (x) G) - (G^T (x) 1): vectorized [G, .].
SpMat commutator_superop(const SpMat& G);

// Vectorized 2 b . b+ - b+b . - . b+b (unit rate).
SpMat dissipator_superop(const SpMat& b);

// Sum of commutator terms and rate-weighted dissipators on one space.
SpMat build_liouvillian(const std::vector<std::pair<cxd, SpMat>>& hamiltonian_terms,
                        const std::vector<std::pair<double, SpMat>>& dissipators);

// Cheap operator-norm scale (max absolute column sum).
double norm_scale(const SpMat& L);

struct SteadyOptions {
    Vec guess;                  // optional starting vector (vectorized density matrix)
    bool check_unique = true;   // estimate |lambda_2| and reject degenerate kernels
    double shift_rel = 1e-8;    // inverse-iteration shift relative to norm_scale(L)
    double degeneracy_tol = 1e-10;  // absolute: |lambda_2| below this is degenerate
    double residual_rel = 1e-8;     // accept when ||L x|| <= residual_rel * ||L||
};

struct SteadyResult {
    Mat rho;            // trace-one Hermitian steady state
    double residual;    // ||L vec(rho)|| / norm_scale(L)
    double gap;         // |lambda_2| estimate; 0 when check_unique is off
};

SteadyResult steady_state(const SpMat& L, int dim, const SteadyOptions& opt = {});

// Magnitude of the slowest nonzero eigenvalue, from deflated inverse iteration.
double spectral_gap(const SpMat& L, const Vec& steady_vec, double shift_rel = 1e-8);

// Integrate vec(rho) along L over a time grid; states are Hermitized at output
// points and the trace drift must stay within 1e-8 of one (SolverError otherwise).
std::vector<Mat> evolve(const SpMat& L, const Mat& rho0, const std::vector<double>& t_grid,
                        const EvolveConfig& cfg = {});

// Same flow with an additional time-dependent scalar-coefficient term:
// d vec(rho)/dt = L0 v + f(t) * (B v) + conj(f(t)) * (Bc v).
std::vector<Mat> evolve_scalar_driven(const SpMat& L0, const SpMat& B, const SpMat& Bc,
                                      const std::function<cxd(double)>& f, const Mat& rho0,
                                      const std::vector<double>& t_grid,
                                      const EvolveConfig& cfg = {});

} // namespace dopo
