#pragma once

#include <complex>

#include <Eigen/Dense>

namespace coscpmm {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Selects between the OpenMP kernels and the plain serial reference loops.
/// Both produce identical results; the serial path is kept for testing and
/// benchmarking.
enum class Exec { serial, parallel };

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

}  // namespace coscpmm
