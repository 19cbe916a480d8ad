#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

namespace pryso {

using Matrix6c = Eigen::Matrix<std::complex<double>, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Angular momentum matrices for I = 5/2 in the basis m = +5/2 ... -5/2.
struct SpinOperators {
  Matrix6c ix, iy, iz;

  const Matrix6c& component(int k) const {
    return k == 0 ? ix : (k == 1 ? iy : iz);
  }
};

/// The I = 5/2 operators used throughout (built once, immutable).
const SpinOperators& spin_operators();

}  // namespace pryso
