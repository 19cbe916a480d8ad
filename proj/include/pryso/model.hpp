#pragma once

#include <string>

#include "pryso/tensor.hpp"

namespace pryso {

/// Zeeman + quadrupole parameter set for one electronic state.
struct StateParams {
  EulerAngles zeeman_angles;
  ZeemanPrincipal g;
  EulerAngles quad_angles;
  QuadrupolePrincipal q;

  InteractionTensor zeeman_tensor() const { return build_tensor(zeeman_angles, g); }
  InteractionTensor quad_tensor() const { return build_tensor(quad_angles, q); }
};

/// Crystal axis directions used to print tensors in the (D1, D2, b) basis.
/// b is the C2 axis; D1/D2 come from the measured polar angles.
struct AxisDirections {
  double theta_d1 = deg2rad(92.0859);
  double phi_d1 = deg2rad(-0.0218);
  double theta_d2 = deg2rad(90.5980);
  double phi_d2 = deg2rad(90.0);
};

/// Full hyperfine model: both electronic states plus the shared C2 axis.
struct HamiltonianModel {
  StateParams ground;
  StateParams excited;
  C2Orientation c2;
  AxisDirections axes;
};

enum class State { Ground, Excited };

const StateParams& state_params(const HamiltonianModel& m, State s);

/// Basis-change matrix whose rows are the D1, D2 and b directions.
Eigen::Matrix3d d1d2b_axes(const HamiltonianModel& m);

/// Tensor components in the (D1, D2, b) basis: U^T * t * U with U as above.
Eigen::Matrix3d to_d1d2b(const Eigen::Matrix3d& lab_tensor,
                         const HamiltonianModel& m);

HamiltonianModel load_model(const std::string& path);
void save_model(const HamiltonianModel& m, const std::string& path);
HamiltonianModel model_from_json_text(const std::string& text);
std::string model_to_json_text(const HamiltonianModel& m);

/// Short content hash of the serialized model (for dataset metadata).
std::string model_hash(const HamiltonianModel& m);

/// The published site-2 fit parameters (same values as data/site2_table1.json).
HamiltonianModel site2_table1();

}  // namespace pryso
