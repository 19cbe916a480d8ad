#include "pryso/hamiltonian.hpp"

#include "pryso/errors.hpp"

namespace pryso {

SubsiteHamiltonian make_subsite_hamiltonian(const InteractionTensor& zeeman,
                                            const InteractionTensor& quad) {
  const SpinOperators& ops = spin_operators();
  SubsiteHamiltonian sh;
  sh.hq = Matrix6c::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      sh.hq += quad.m(i, j) * (ops.component(i) * ops.component(j));
  for (int k = 0; k < 3; ++k) {
    sh.zeeman_op[k] = Matrix6c::Zero();
    // M in kHz/G, energies in MHz
    for (int j = 0; j < 3; ++j)
      sh.zeeman_op[k] += (zeeman.m(k, j) / 1000.0) * ops.component(j);
  }
  return sh;
}

SubsiteHamiltonian make_subsite_hamiltonian(const StateParams& state,
                                            int subsite,
                                            const C2Orientation& c2) {
  InteractionTensor m = state.zeeman_tensor();
  InteractionTensor q = state.quad_tensor();
  if (subsite == 2) {
    m = c2_transform(m, c2);
    q = c2_transform(q, c2);
  }
  return make_subsite_hamiltonian(m, q);
}

Matrix6c effective_hamiltonian(const StateParams& state, int subsite,
                               const C2Orientation& c2,
                               const Eigen::Vector3d& b_gauss) {
  return make_subsite_hamiltonian(state, subsite, c2).at(b_gauss);
}

EnergyLevels eigensystem(const Matrix6c& h) {
  const double scale = h.norm();
  if ((h - h.adjoint()).norm() > 1e-10 * std::max(scale, 1.0))
    throw NonHermitianInput("eigensystem: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix6c> solver(h);
  EnergyLevels out;
  out.energies = solver.eigenvalues();
  out.vectors = solver.eigenvectors();
  return out;
}

}  // namespace pryso
