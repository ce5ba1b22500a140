#pragma once

// Truncated Fock-space building blocks for one and two bosonic modes.
// Two-mode composite ordering everywhere: pump (x) signal, index p*dim_s + s.

#include "dopo/types.hpp"

namespace dopo {

// Ladder operator a with <n-1|a|n> = sqrt(n), truncated to dim levels.
SpMat annihilation(int dim);
SpMat creation(int dim);
SpMat number_op(int dim);
SpMat identity_op(int dim);

// Kronecker product in pump (x) signal ordering.
SpMat kron(const SpMat& pump_op, const SpMat& signal_op);
SpMat lift_pump(const SpMat& op, int dim_s);    // op (x) 1_s
SpMat lift_signal(const SpMat& op, int dim_p);  // 1_p (x) op

// States.
Vec fock_state(int dim, int n);
Vec coherent_state(int dim, cxd alpha);
Mat thermal_state(int dim, double nbar);
Mat projector(const Vec& psi);  // |psi><psi|, not normalized beyond psi itself

// Dense displacement exp(beta a+ - conj(beta) a) and squeeze
// exp((conj(xi) a^2 - xi a+^2)/2) via the matrix exponential. Exact only well
// inside the truncation; used for state construction and as an oracle.
Mat displacement_op(int dim, cxd beta);
Mat squeeze_op(int dim, cxd xi);

// 2 b rho b+ - b+b rho - rho b+b (rate 1; scale at the call site).
Mat dissipator_apply(const SpMat& b, const Mat& rho);

// Partial traces of a two-mode density matrix (dim_p*dim_s square).
Mat partial_trace_signal(const Mat& rho, int dim_p, int dim_s);  // -> pump state
Mat partial_trace_pump(const Mat& rho, int dim_p, int dim_s);    // -> signal state

// Tr{A rho} with sparse A; A and rho must agree in size.
cxd expval(const SpMat& A, const Mat& rho);

Mat hermitize(const Mat& rho);

} // namespace dopo
