#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pryso/hamiltonian.hpp"

namespace pryso {

enum class Band { GroundLow = 0, GroundHigh = 1, Excited = 2 };

const char* band_name(Band b);
Band band_from_name(const std::string& name);

/// Frequency windows used to band-classify measured peaks. Predicted peaks
/// carry their provenance band instead; windows matter only for real data.
struct BandWindows {
  double excited_lo = 1.6;
  double ground_low_lo = 3.0;   // also excited_hi
  double ground_high_lo = 4.55; // also ground_low_hi
  double ground_high_hi = 6.5;

  std::optional<Band> classify(double f_mhz) const;
};

/// B(t) = b0 * (sqrt(1-t^2) cos(2*pi*turns*t), sqrt(1-t^2) sin(2*pi*turns*t), t).
Eigen::Vector3d spiral_field(double t, double b0, int turns = 3);

struct SpiralScan {
  double b0 = 80.0;
  int n_points = 201;
  int turns = 3;

  std::vector<double> t_values() const;
};

/// One predicted transition with its provenance.
struct Peak {
  double freq_mhz;
  Band band;
  State state;
  int subsite;       // 1 or 2
  int lower_doublet; // transition connects doublets (lower, lower+1)
  int level_a, level_b; // ascending-level indices of the pair
};

struct PeakSet {
  Eigen::Vector3d field;
  std::array<std::vector<double>, 3> bands; // sorted ascending per band
  std::vector<Peak> annotated;
};

/// Doublet labels (0,1,2) for each ascending eigenlevel at field b, found by
/// eigenvector-overlap continuation from B = 0 in `steps` ramp steps.
std::array<int, 6> assign_doublets(const SubsiteHamiltonian& sh,
                                   const Eigen::Vector3d& b_gauss, int steps);

/// Precomputed per-state/subsite Hamiltonians for fast repeated peak
/// prediction. Immutable after construction; safe to share across threads.
class ModelEngine {
 public:
  explicit ModelEngine(const HamiltonianModel& model, bool with_ground = true,
                       bool with_excited = true);

  PeakSet peaks_at(const Eigen::Vector3d& b_gauss, int steps = 1) const;

  bool has_ground() const { return with_ground_; }
  bool has_excited() const { return with_excited_; }
  const SubsiteHamiltonian& subsite(State s, int subsite) const;

 private:
  using Subspace = Eigen::Matrix<std::complex<double>, 6, 2>;

  bool with_ground_, with_excited_;
  SubsiteHamiltonian ground_[2], excited_[2];
  Band ground_band_[2]; // band of transition (doublet d -> d+1)
  std::array<Subspace, 3> zero_sub_[4]; // cached B=0 doublet subspaces
};

/// predict_peaks with the default 16-step adiabatic continuation.
PeakSet predict_peaks(const HamiltonianModel& model,
                      const Eigen::Vector3d& b_gauss, int steps = 16);

struct DatasetMeta {
  double b0 = 80.0;
  int n_points = 201;
  int turns = 3;
  double noise_khz = 0.0;
  std::uint64_t seed = 0;
  std::string model_hash;
};

struct ObservedPoint {
  int index = 0;
  double t = 0.0;
  Eigen::Vector3d field = Eigen::Vector3d::Zero();
  std::array<std::vector<double>, 3> bands;
};

struct FieldScanDataset {
  DatasetMeta meta;
  std::vector<ObservedPoint> points;
};

/// Predicted peaks at every scan point plus i.i.d. Gaussian frequency noise
/// (per-point RNG stream derived from (seed, point index)).
FieldScanDataset synthesize_dataset(const HamiltonianModel& model,
                                    const SpiralScan& scan, double noise_khz,
                                    std::uint64_t seed);

/// CSV: index,t,bx,by,bz,band,freq_mhz; sidecar metadata at <path>.meta.json.
void save_dataset_csv(const FieldScanDataset& ds, const std::string& path);
FieldScanDataset load_dataset_csv(const std::string& path);

}  // namespace pryso
