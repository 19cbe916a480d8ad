#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pryso/spectra.hpp"

namespace pryso {

enum class ParamKind { Angle, GFactor, EDValue, C2Angle };

/// One fit parameter of the Hamiltonian model, exposed in Table-style units
/// (degrees, kHz/G, MHz).
struct ParamDef {
  const char* name;
  ParamKind kind;
  double (*get)(const HamiltonianModel&);
  void (*set)(HamiltonianModel&, double);
};

/// All 24 model parameters: ground 0..10, C2 11..12, excited 13..23.
const std::vector<ParamDef>& model_params();
Eigen::VectorXd pack_params(const HamiltonianModel& m);
HamiltonianModel unpack_params(const HamiltonianModel& base,
                               const Eigen::VectorXd& x);

struct FitConfig {
  double initial_temp = 0.0; // kHz of cost; 0 = auto from ~80% acceptance
  double cooling = 0.95;
  int steps_per_temp = 200;
  double min_temp_fraction = 1e-4;
  long max_evals = 2000000;
  double angle_scale_deg = 2.0;
  double g_scale = 0.05;     // kHz/G
  double ed_scale = 0.02;    // MHz
  double c2_scale_deg = 0.5;
  double unmatched_penalty_mhz = 0.5;
  std::uint64_t seed = 1;
  int restarts = 1;
  bool staged = true;  // ground+C2 on ground bands first, then excited
  bool polish = true;  // simplex descent from the annealed point
  double rms_ceiling_khz = 30.0;
  int threads = 0; // 0 = hardware concurrency
  BandWindows windows;

  double scale_for(ParamKind k) const;
};

/// Matched observed/predicted peak indices per field point and band.
struct Assignment {
  struct BandPairs {
    std::vector<std::pair<int, int>> pairs; // (observed idx, predicted idx)
    int unmatched = 0;
  };
  std::vector<std::array<BandPairs, 3>> points;
  int total_matched = 0;
  int total_unmatched = 0;
};

struct CostResult {
  double cost_khz = 0.0;    // includes the unmatched-peak penalty
  double rms_khz = 0.0;     // matched peaks only
  Assignment assignment;
};

/// Minimum-total-squared one-to-one matching within each band (sorted-order
/// alignment), penalty per unmatched peak. Throws EmptyDataset.
CostResult cost(const HamiltonianModel& model, const FieldScanDataset& data,
                const FitConfig& cfg = {});

/// Optimal in-order alignment of `shorter` into `longer` (both sorted);
/// returns pairs of indices (shorter idx, longer idx) minimizing the sum of
/// squared differences.
std::vector<std::pair<int, int>> align_sorted(const std::vector<double>& a,
                                              const std::vector<double>& b);

struct FitResult {
  HamiltonianModel model;
  double rms_khz = 0.0;
  double cost_khz = 0.0;
  int unmatched = 0;
  Eigen::VectorXd std_errors;  // 24, Table-style units
  Eigen::MatrixXd covariance;  // 24 x 24
  std::vector<std::string> param_names;
  long evaluations = 0;
  bool converged = true;
  std::uint64_t seed = 0;
  std::string ambiguity_note;
};

/// Simulated annealing (Metropolis, geometric cooling) from `init`,
/// deterministic given cfg.seed; best model across restarts.
FitResult anneal(const FieldScanDataset& data, const FitConfig& cfg,
                 const HamiltonianModel& init);

/// Gauss-Newton covariance sigma^2 (J^T J)^-1 from the finite-difference
/// Jacobian of all matched peak frequencies. Throws SingularJacobian.
struct CovarianceResult {
  Eigen::MatrixXd covariance;
  Eigen::VectorXd std_errors;
};
CovarianceResult covariance(const HamiltonianModel& model,
                            const FieldScanDataset& data,
                            const FitConfig& cfg = {});

/// Re-express a state's (Euler angles, principal values) in the equivalent
/// representation nearest to `ref`. The M and Q tensors are unchanged; only
/// the parametrization (axis labels, Euler branch, sign of E) may differ.
StateParams nearest_equivalent_params(const StateParams& fitted,
                                      const StateParams& ref);

/// Nearest representative of `fitted` within its exact spectrum-preserving
/// class to `ref`. Beyond reparametrizations this searches the discrete
/// transformations that change the tensors but not any transition frequency:
/// time reversal (M -> -M), spectral negation (M, Q -> -M, -Q), and pi spin
/// rotations about the M principal axes (two g signs flip, Q reorients).
StateParams nearest_spectral_equivalent(const StateParams& fitted,
                                        const StateParams& ref);

/// Spectrum-preserving transformations of a model, each verified numerically
/// at 10 seeded random fields (< 1e-6 MHz on the full peak list).
std::vector<std::pair<std::string, HamiltonianModel>> canonical_ambiguity_report(
    const HamiltonianModel& model);

void save_fit_result_json(const FitResult& r, const FitConfig& cfg,
                          const std::string& path);
void save_covariance_csv(const FitResult& r, const std::string& path);

}  // namespace pryso
