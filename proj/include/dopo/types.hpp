#pragma once

#include <complex>
#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dopo {

using cxd  = std::complex<double>;
using Mat  = Eigen::MatrixXcd;
using Vec  = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cxd>;
using Triplet = Eigen::Triplet<cxd>;

inline constexpr cxd I{0.0, 1.0};

} // namespace dopo
