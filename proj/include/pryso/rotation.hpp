#pragma once

#include <Eigen/Dense>

namespace pryso {

/// ZYZ Euler angles, radians. Not normalized to a principal range.
struct EulerAngles {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// R(alpha,beta,gamma) = Rz(alpha) * Ry(beta) * Rz(gamma), det = +1.
Eigen::Matrix3d rotation_matrix(const EulerAngles& angles);

/// Extract ZYZ angles from a proper rotation (one representative).
EulerAngles euler_from_rotation(const Eigen::Matrix3d& r);

/// Unit vector from polar angle theta (from +z) and azimuth phi (from +x).
Eigen::Vector3d unit_from_polar(double theta, double phi);

constexpr double deg2rad(double d) { return d * 3.14159265358979323846 / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / 3.14159265358979323846; }

}  // namespace pryso
