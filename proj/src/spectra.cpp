#include "pryso/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pryso/errors.hpp"

namespace pryso {

using nlohmann::json;

const char* band_name(Band b) {
  switch (b) {
    case Band::GroundLow: return "ground-low";
    case Band::GroundHigh: return "ground-high";
    case Band::Excited: return "excited";
  }
  return "?";
}

Band band_from_name(const std::string& name) {
  if (name == "ground-low") return Band::GroundLow;
  if (name == "ground-high") return Band::GroundHigh;
  if (name == "excited") return Band::Excited;
  throw MalformedInput("unknown band name: " + name);
}

std::optional<Band> BandWindows::classify(double f) const {
  if (f >= excited_lo && f < ground_low_lo) return Band::Excited;
  if (f >= ground_low_lo && f < ground_high_lo) return Band::GroundLow;
  if (f >= ground_high_lo && f < ground_high_hi) return Band::GroundHigh;
  return std::nullopt;
}

Eigen::Vector3d spiral_field(double t, double b0, int turns) {
  if (std::abs(t) > 1.0) throw OutOfRange("spiral_field: |t| > 1");
  const double r = std::sqrt(std::max(0.0, 1.0 - t * t));
  const double phase = 2.0 * M_PI * turns * t;
  return {b0 * r * std::cos(phase), b0 * r * std::sin(phase), b0 * t};
}

std::vector<double> SpiralScan::t_values() const {
  std::vector<double> ts;
  ts.reserve(n_points);
  if (n_points == 1) {
    ts.push_back(-1.0);
    return ts;
  }
  for (int i = 0; i < n_points; ++i)
    ts.push_back(-1.0 + 2.0 * i / (n_points - 1));
  return ts;
}

std::array<int, 6> assign_doublets(const SubsiteHamiltonian& sh,
                                   const Eigen::Vector3d& b, int steps) {
  if (steps < 1) steps = 1;
  const EnergyLevels zero = eigensystem(sh.hq);
  // zero-field doublet subspaces (ascending pairs)
  std::array<Eigen::Matrix<std::complex<double>, 6, Eigen::Dynamic>, 3> sub;
  for (int d = 0; d < 3; ++d) sub[d] = zero.vectors.block(0, 2 * d, 6, 2);

  std::array<int, 6> labels{};
  for (int s = 1; s <= steps; ++s) {
    const Eigen::Vector3d bs = b * (double(s) / steps);
    const EnergyLevels lv = eigensystem(sh.at(bs));
    std::array<int, 3> count{0, 0, 0};
    for (int k = 0; k < 6; ++k) {
      double best = -1.0;
      int arg = 0;
      for (int d = 0; d < 3; ++d) {
        const double p = (sub[d].adjoint() * lv.vectors.col(k)).squaredNorm();
        if (p > best) { best = p; arg = d; }
      }
      labels[k] = arg;
      ++count[arg];
    }
    if (count[0] != 2 || count[1] != 2 || count[2] != 2)
      throw DegenerateLevels("assign_doublets: doublet tracking failed");
    for (int d = 0; d < 3; ++d) {
      Eigen::Matrix<std::complex<double>, 6, Eigen::Dynamic> next(6, 2);
      int c = 0;
      for (int k = 0; k < 6; ++k)
        if (labels[k] == d) next.col(c++) = lv.vectors.col(k);
      sub[d] = next;
    }
  }
  return labels;
}

ModelEngine::ModelEngine(const HamiltonianModel& model, bool with_ground,
                         bool with_excited)
    : with_ground_(with_ground), with_excited_(with_excited) {
  const auto cache_zero = [&](const SubsiteHamiltonian& sh, int slot) {
    const EnergyLevels z = eigensystem(sh.hq);
    for (int d = 0; d < 3; ++d) zero_sub_[slot][d] = z.vectors.block<6, 2>(0, 2 * d);
    return z;
  };
  if (with_ground_) {
    ground_[0] = make_subsite_hamiltonian(model.ground, 1, model.c2);
    ground_[1] = make_subsite_hamiltonian(model.ground, 2, model.c2);
    const EnergyLevels z = cache_zero(ground_[0], 0);
    cache_zero(ground_[1], 1);
    // which adjacent doublet pair carries the larger zero-field gap
    const double gap01 = z.energies[2] - z.energies[0];
    const double gap12 = z.energies[4] - z.energies[2];
    ground_band_[0] = gap01 > gap12 ? Band::GroundHigh : Band::GroundLow;
    ground_band_[1] = gap01 > gap12 ? Band::GroundLow : Band::GroundHigh;
  }
  if (with_excited_) {
    excited_[0] = make_subsite_hamiltonian(model.excited, 1, model.c2);
    excited_[1] = make_subsite_hamiltonian(model.excited, 2, model.c2);
    cache_zero(excited_[0], 2);
    cache_zero(excited_[1], 3);
  }
}

const SubsiteHamiltonian& ModelEngine::subsite(State s, int subsite) const {
  return s == State::Ground ? ground_[subsite - 1] : excited_[subsite - 1];
}

namespace {

std::array<int, 6> labels_from_subspaces(
    const std::array<Eigen::Matrix<std::complex<double>, 6, 2>, 3>& sub,
    const Matrix6c& vectors) {
  std::array<int, 6> labels{};
  std::array<int, 3> count{0, 0, 0};
  for (int k = 0; k < 6; ++k) {
    double best = -1.0;
    int arg = 0;
    for (int d = 0; d < 3; ++d) {
      const double p = (sub[d].adjoint() * vectors.col(k)).squaredNorm();
      if (p > best) { best = p; arg = d; }
    }
    labels[k] = arg;
    ++count[arg];
  }
  if (count[0] != 2 || count[1] != 2 || count[2] != 2)
    throw DegenerateLevels("doublet tracking failed");
  return labels;
}

}  // namespace

PeakSet ModelEngine::peaks_at(const Eigen::Vector3d& b, int steps) const {
  PeakSet out;
  out.field = b;
  const auto emit = [&](State st, int sub, const SubsiteHamiltonian& sh,
                        int slot) {
    const EnergyLevels lv = eigensystem(sh.at(b));
    std::array<int, 6> labels;
    if (steps <= 1) {
      labels = labels_from_subspaces(zero_sub_[slot], lv.vectors);
    } else {
      auto ramp = zero_sub_[slot];
      for (int s = 1; s < steps; ++s) {
        const EnergyLevels mid = eigensystem(sh.at(b * (double(s) / steps)));
        const auto lab = labels_from_subspaces(ramp, mid.vectors);
        for (int d = 0; d < 3; ++d) {
          int c = 0;
          for (int k = 0; k < 6; ++k)
            if (lab[k] == d) ramp[d].col(c++) = mid.vectors.col(k);
        }
      }
      labels = labels_from_subspaces(ramp, lv.vectors);
    }
    std::array<std::array<int, 2>, 3> groups{};
    std::array<int, 3> fill{0, 0, 0};
    for (int k = 0; k < 6; ++k) groups[labels[k]][fill[labels[k]]++] = k;
    for (int d = 0; d < 2; ++d) {
      const Band band = st == State::Excited ? Band::Excited : ground_band_[d];
      for (int a : groups[d])
        for (int bb : groups[d + 1]) {
          Peak p;
          p.freq_mhz = std::abs(lv.energies[bb] - lv.energies[a]);
          p.band = band;
          p.state = st;
          p.subsite = sub;
          p.lower_doublet = d;
          p.level_a = a;
          p.level_b = bb;
          out.annotated.push_back(p);
          out.bands[static_cast<int>(band)].push_back(p.freq_mhz);
        }
    }
  };
  if (with_ground_) {
    emit(State::Ground, 1, ground_[0], 0);
    emit(State::Ground, 2, ground_[1], 1);
  }
  if (with_excited_) {
    emit(State::Excited, 1, excited_[0], 2);
    emit(State::Excited, 2, excited_[1], 3);
  }
  for (auto& v : out.bands) std::sort(v.begin(), v.end());
  return out;
}

PeakSet predict_peaks(const HamiltonianModel& model, const Eigen::Vector3d& b,
                      int steps) {
  return ModelEngine(model).peaks_at(b, steps);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

FieldScanDataset synthesize_dataset(const HamiltonianModel& model,
                                    const SpiralScan& scan, double noise_khz,
                                    std::uint64_t seed) {
  const ModelEngine engine(model);
  FieldScanDataset ds;
  ds.meta.b0 = scan.b0;
  ds.meta.n_points = scan.n_points;
  ds.meta.turns = scan.turns;
  ds.meta.noise_khz = noise_khz;
  ds.meta.seed = seed;
  ds.meta.model_hash = model_hash(model);

  const std::vector<double> ts = scan.t_values();
  for (int i = 0; i < (int)ts.size(); ++i) {
    ObservedPoint pt;
    pt.index = i;
    pt.t = ts[i];
    pt.field = spiral_field(ts[i], scan.b0, scan.turns);
    PeakSet ps = engine.peaks_at(pt.field, 1);
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(i + 1)));
    std::normal_distribution<double> noise(0.0, noise_khz / 1000.0);
    for (int band = 0; band < 3; ++band) {
      pt.bands[band] = ps.bands[band];
      if (noise_khz > 0)
        for (double& f : pt.bands[band]) f += noise(rng);
      std::sort(pt.bands[band].begin(), pt.bands[band].end());
    }
    ds.points.push_back(std::move(pt));
  }
  return ds;
}

void save_dataset_csv(const FieldScanDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write dataset: " + path);
  out << "index,t,bx,by,bz,band,freq_mhz\n";
  char line[256];
  for (const auto& pt : ds.points) {
    for (int band = 0; band < 3; ++band)
      for (double f : pt.bands[band]) {
        std::snprintf(line, sizeof line, "%d,%.8f,%.6f,%.6f,%.6f,%s,%.9f\n",
                      pt.index, pt.t, pt.field.x(), pt.field.y(), pt.field.z(),
                      band_name(static_cast<Band>(band)), f);
        out << line;
      }
  }
  json meta = {{"b0_gauss", ds.meta.b0},        {"n_points", ds.meta.n_points},
               {"turns", ds.meta.turns},        {"noise_khz", ds.meta.noise_khz},
               {"seed", ds.meta.seed},          {"model_hash", ds.meta.model_hash}};
  std::ofstream mout(path + ".meta.json");
  if (mout) mout << meta.dump(2) << "\n";
}

FieldScanDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open dataset: " + path);
  FieldScanDataset ds;
  std::string line;
  if (!std::getline(in, line)) throw MalformedInput("empty dataset file");
  std::map<int, ObservedPoint> pts;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 7)
      throw MalformedInput("dataset row " + std::to_string(lineno) +
                           ": expected 7 columns");
    try {
      const int idx = std::stoi(cells[0]);
      ObservedPoint& pt = pts[idx];
      pt.index = idx;
      pt.t = std::stod(cells[1]);
      pt.field = {std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])};
      const Band band = band_from_name(cells[5]);
      pt.bands[static_cast<int>(band)].push_back(std::stod(cells[6]));
    } catch (const std::invalid_argument&) {
      throw MalformedInput("dataset row " + std::to_string(lineno) +
                           ": bad numeric field");
    }
  }
  for (auto& [idx, pt] : pts) {
    for (auto& v : pt.bands) std::sort(v.begin(), v.end());
    ds.points.push_back(std::move(pt));
  }
  ds.meta.n_points = (int)ds.points.size();

  std::ifstream min(path + ".meta.json");
  if (min) {
    try {
      json meta = json::parse(min);
      ds.meta.b0 = meta.value("b0_gauss", 0.0);
      ds.meta.n_points = meta.value("n_points", ds.meta.n_points);
      ds.meta.turns = meta.value("turns", 3);
      ds.meta.noise_khz = meta.value("noise_khz", 0.0);
      ds.meta.seed = meta.value("seed", std::uint64_t{0});
      ds.meta.model_hash = meta.value("model_hash", std::string{});
    } catch (const json::exception&) {
      // sidecar is optional; a broken one is ignored
    }
  }
  return ds;
}

}  // namespace pryso
