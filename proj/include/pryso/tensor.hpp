#pragma once

#include <Eigen/Dense>
#include <optional>

#include "pryso/rotation.hpp"

namespace pryso {

/// Quadrupole principal values: diag(-E, E, D), MHz.
struct QuadrupolePrincipal {
  double e = 0.0;
  double d = 0.0;
  Eigen::Vector3d diagonal() const { return {-e, e, d}; }
};

/// Zeeman principal values (Lande g-factors), kHz/G.
struct ZeemanPrincipal {
  double g1 = 0.0;
  double g2 = 0.0;
  double g3 = 0.0;
  Eigen::Vector3d diagonal() const { return {g1, g2, g3}; }
};

/// Orientation of the crystal C2 axis relative to the lab (coil) frame.
/// theta: angle to the z axis; phi: azimuth of the xy-plane projection.
struct C2Orientation {
  double theta = 0.0;
  double phi = 0.0;

  /// R_C2 = R(phi,theta,0) * R(pi,0,0) * R(phi,theta,0)^T. Involution.
  Eigen::Matrix3d rotation() const;
  Eigen::Vector3d axis() const { return unit_from_polar(theta, phi); }
};

/// Symmetric 3x3 interaction tensor (Q in MHz, M in kHz/G), lab frame.
struct InteractionTensor {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

InteractionTensor build_tensor(const EulerAngles& angles,
                               const QuadrupolePrincipal& pv);
InteractionTensor build_tensor(const EulerAngles& angles,
                               const ZeemanPrincipal& pv);

/// Conjugate a tensor by the pi rotation about the C2 axis (subsite 2 tensors).
InteractionTensor c2_transform(const InteractionTensor& t,
                               const C2Orientation& c2);

}  // namespace pryso
