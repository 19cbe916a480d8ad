#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pryso/spectra.hpp"

namespace pryso {

struct GridSpec {
  double extent = 600.0;  // symmetric box [-extent, extent]^3, Gauss
  double step = 25.0;
  double gradient_threshold = 0.01; // Hz/G, Newton convergence target
  int newton_cap = 50;
  double degeneracy_tol_mhz = 1e-3; // 1 kHz level-gap guard
  double dedup_radius = 2.0;        // Gauss
  double delta_b = 0.08;            // Gauss, field-fluctuation scale
  double report_resolution = 0.05;  // Gauss; sensitivities quoted at the
                                    // field snapped to this setting grid
  State state = State::Ground;
  int threads = 0;
};

struct ZefozCandidate {
  Eigen::Vector3d field;       // reported field (snapped to resolution)
  Eigen::Vector3d field_exact; // converged Newton zero
  State state = State::Ground;
  int subsite = 1;
  int level_i = 0, level_j = 0; // ascending-level indices, i < j
  double f_mhz = 0.0;
  Eigen::Vector3d s1 = Eigen::Vector3d::Zero();   // Hz/G, at reported field
  Eigen::Matrix3d s2 = Eigen::Matrix3d::Zero();   // Hz/G^2
  double s1_norm = 0.0;
  double s2_scalar = 0.0;
  double t2_s = 0.0;
};

double transition_frequency(const SubsiteHamiltonian& sh, int level_i,
                            int level_j, const Eigen::Vector3d& b_gauss);

/// Hellmann-Feynman gradient of the transition frequency, Hz/G.
/// Throws DegeneracyError if either level sits within tol of a neighbor.
Eigen::Vector3d zeeman_gradient(const SubsiteHamiltonian& sh, int level_i,
                                int level_j, const Eigen::Vector3d& b_gauss,
                                double degeneracy_tol_mhz = 1e-3);

/// Second-order perturbation curvature of the transition frequency, Hz/G^2.
Eigen::Matrix3d zeeman_curvature(const SubsiteHamiltonian& sh, int level_i,
                                 int level_j, const Eigen::Vector3d& b_gauss,
                                 double degeneracy_tol_mhz = 1e-3);

/// Central finite-difference fallbacks (valid through avoided crossings).
Eigen::Vector3d fd_gradient(const SubsiteHamiltonian& sh, int level_i,
                            int level_j, const Eigen::Vector3d& b_gauss,
                            double step_gauss = 0.01);
Eigen::Matrix3d fd_curvature(const SubsiteHamiltonian& sh, int level_i,
                             int level_j, const Eigen::Vector3d& b_gauss,
                             double step_gauss = 0.05);

/// Scalar reading of the curvature tensor: geometric mean of the absolute
/// eigenvalues (see README for why not the worst-case eigenvalue).
double s2_scalar_value(const Eigen::Matrix3d& s2);

/// T2 = 1 / (pi (S1 dB + S2 dB^2)); +inf when both sensitivities vanish.
double project_t2(double s1_hz_per_g, double s2_hz_per_g2, double delta_b_gauss);

/// Newton iteration b <- b - s2^-1 s1 toward a gradient zero. Returns
/// nullopt (NoZero) on cap or box exit; throws SingularCurvature.
std::optional<ZefozCandidate> newton_refine(const SubsiteHamiltonian& sh,
                                            State state, int subsite,
                                            int level_i, int level_j,
                                            const Eigen::Vector3d& b_start,
                                            const GridSpec& spec);

/// Full grid search over both subsites of spec.state; candidates merged
/// within dedup_radius and ranked by projected T2 descending.
std::vector<ZefozCandidate> grid_search(const HamiltonianModel& model,
                                        const GridSpec& spec);

void save_candidates_csv(const std::vector<ZefozCandidate>& cands,
                         const std::string& path);
void save_candidates_json(const std::vector<ZefozCandidate>& cands,
                          const GridSpec& spec, const std::string& path);
/// |B| vs S2 scalar scatter data (one row per candidate).
void save_scatter_csv(const std::vector<ZefozCandidate>& cands,
                      const std::string& path);

}  // namespace pryso
