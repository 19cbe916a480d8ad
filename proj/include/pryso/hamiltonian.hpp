#pragma once

#include <array>

#include "pryso/model.hpp"
#include "pryso/spin.hpp"

namespace pryso {

/// Eigensystem of a 6x6 Hermitian Hamiltonian: ascending energies (MHz)
/// and the matching orthonormal eigenvector columns.
struct EnergyLevels {
  Vector6d energies;
  Matrix6c vectors;
};

/// Field- and subsite-resolved Hamiltonian pieces for one electronic state,
/// precomputed so that H(B) = hq + sum_k B_k * zeeman_op[k] is cheap.
/// zeeman_op is (M.I)_k in MHz/G; hq = I.Q.I in MHz.
struct SubsiteHamiltonian {
  Matrix6c hq;
  std::array<Matrix6c, 3> zeeman_op;

  Matrix6c at(const Eigen::Vector3d& b_gauss) const {
    return hq + b_gauss.x() * zeeman_op[0] + b_gauss.y() * zeeman_op[1] +
           b_gauss.z() * zeeman_op[2];
  }
};

SubsiteHamiltonian make_subsite_hamiltonian(const StateParams& state,
                                            int subsite,
                                            const C2Orientation& c2);

SubsiteHamiltonian make_subsite_hamiltonian(const InteractionTensor& zeeman,
                                            const InteractionTensor& quad);

/// H = B.M.I + I.Q.I in MHz (B in Gauss, M in kHz/G, Q in MHz).
Matrix6c effective_hamiltonian(const StateParams& state, int subsite,
                               const C2Orientation& c2,
                               const Eigen::Vector3d& b_gauss);

/// Diagonalize a Hermitian 6x6. Throws NonHermitianInput if the symmetry
/// check (1e-10 relative) fails.
EnergyLevels eigensystem(const Matrix6c& h);

}  // namespace pryso
