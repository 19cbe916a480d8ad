#include "pryso/spin.hpp"

#include <cmath>

namespace pryso {

namespace {

SpinOperators build() {
  constexpr double I = 2.5;
  SpinOperators ops;
  Matrix6c ip = Matrix6c::Zero();
  Matrix6c iz = Matrix6c::Zero();
  // basis index k holds m = 5/2 - k
  for (int k = 0; k < 6; ++k) {
    const double m = I - k;
    iz(k, k) = m;
    if (k > 0) {
      // I+ |m> = sqrt(I(I+1) - m(m+1)) |m+1>
      ip(k - 1, k) = std::sqrt(I * (I + 1.0) - m * (m + 1.0));
    }
  }
  const Matrix6c im = ip.adjoint();
  ops.ix = 0.5 * (ip + im);
  ops.iy = std::complex<double>(0, -0.5) * (ip - im);
  ops.iz = iz;
  return ops;
}

}  // namespace

const SpinOperators& spin_operators() {
  static const SpinOperators ops = build();
  return ops;
}

}  // namespace pryso
