#ifndef TRAJEMBED_TYPES_HPP
#define TRAJEMBED_TYPES_HPP

#include <complex>
#include <Eigen/Dense>

namespace trajembed {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr Complex kImag{0.0, 1.0};

// Largest absolute entry, used for matrix comparisons throughout.
inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace trajembed

#endif
