#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstdint>

namespace fbt {

using Real = double;
using Complex = std::complex<Real>;
using Index = Eigen::Index;

using VectorXr = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using VectorXc = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using MatrixXr = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using MatrixXc = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using ArrayXr = Eigen::Array<Real, Eigen::Dynamic, 1>;

/// Hermitian operator in compressed sparse row form. Used for H and v_x.
using SparseOperator = Eigen::SparseMatrix<Complex, Eigen::RowMajor, int>;

/// Units: t = a = ħ = 1 unless a LatticeSpec says otherwise; conductivities in σ0 = e²a/h.
inline constexpr Real kPi = 3.14159265358979323846;

}  // namespace fbt
