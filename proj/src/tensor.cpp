#include "pryso/tensor.hpp"

namespace pryso {

namespace {

InteractionTensor conjugate(const EulerAngles& angles, const Eigen::Vector3d& diag) {
  const Eigen::Matrix3d r = rotation_matrix(angles);
  InteractionTensor t;
  t.m = r * diag.asDiagonal() * r.transpose();
  // symmetrize away rounding
  t.m = 0.5 * (t.m + t.m.transpose()).eval();
  return t;
}

}  // namespace

Eigen::Matrix3d C2Orientation::rotation() const {
  const Eigen::Matrix3d align = rotation_matrix({phi, theta, 0.0});
  const Eigen::Matrix3d pi_z = rotation_matrix({3.14159265358979323846, 0.0, 0.0});
  return align * pi_z * align.transpose();
}

InteractionTensor build_tensor(const EulerAngles& angles,
                               const QuadrupolePrincipal& pv) {
  return conjugate(angles, pv.diagonal());
}

InteractionTensor build_tensor(const EulerAngles& angles,
                               const ZeemanPrincipal& pv) {
  return conjugate(angles, pv.diagonal());
}

InteractionTensor c2_transform(const InteractionTensor& t,
                               const C2Orientation& c2) {
  const Eigen::Matrix3d r = c2.rotation();
  InteractionTensor out;
  out.m = r * t.m * r.transpose();
  out.m = 0.5 * (out.m + out.m.transpose()).eval();
  return out;
}

}  // namespace pryso
