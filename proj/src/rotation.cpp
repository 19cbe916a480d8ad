#include "pryso/rotation.hpp"

#include <cmath>

namespace pryso {

Eigen::Matrix3d rotation_matrix(const EulerAngles& angles) {
  const double ca = std::cos(angles.alpha), sa = std::sin(angles.alpha);
  const double cb = std::cos(angles.beta), sb = std::sin(angles.beta);
  const double cg = std::cos(angles.gamma), sg = std::sin(angles.gamma);
  Eigen::Matrix3d rz1, ry, rz2;
  rz1 << ca, -sa, 0, sa, ca, 0, 0, 0, 1;
  ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rz2 << cg, -sg, 0, sg, cg, 0, 0, 0, 1;
  return rz1 * ry * rz2;
}

EulerAngles euler_from_rotation(const Eigen::Matrix3d& r) {
  EulerAngles e;
  // beta in [0, pi]
  e.beta = std::acos(std::clamp(r(2, 2), -1.0, 1.0));
  if (std::abs(std::sin(e.beta)) > 1e-12) {
    e.alpha = std::atan2(r(1, 2), r(0, 2));
    e.gamma = std::atan2(r(2, 1), -r(2, 0));
  } else {
    // gimbal: only alpha+gamma (or alpha-gamma) is determined
    e.alpha = std::atan2(r(1, 0), r(0, 0));
    e.gamma = 0.0;
    if (r(2, 2) < 0) e.alpha = -e.alpha;
  }
  return e;
}

Eigen::Vector3d unit_from_polar(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
          std::cos(theta)};
}

}  // namespace pryso
