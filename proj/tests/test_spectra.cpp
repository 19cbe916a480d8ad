#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "pryso/errors.hpp"
#include "pryso/spectra.hpp"

using namespace pryso;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("spiral field geometry") {
  CHECK((spiral_field(-1.0, 80.0) - Eigen::Vector3d(0, 0, -80)).norm() < 1e-12);
  CHECK((spiral_field(1.0, 80.0) - Eigen::Vector3d(0, 0, 80)).norm() < 1e-12);
  CHECK((spiral_field(0.0, 80.0) - Eigen::Vector3d(80, 0, 0)).norm() < 1e-12);
  // constant magnitude along the whole scan
  for (double t : {-0.9, -0.35, 0.2, 0.77})
    CHECK(spiral_field(t, 80.0).norm() == doctest::Approx(80.0).epsilon(1e-12));
  CHECK_THROWS_AS(spiral_field(1.5, 80.0), OutOfRange);

  SpiralScan scan;
  const auto ts = scan.t_values();
  REQUIRE(ts.size() == 201);
  CHECK(ts.front() == doctest::Approx(-1.0));
  CHECK(ts.back() == doctest::Approx(1.0));
  CHECK(ts[100] == doctest::Approx(0.0));

  SpiralScan one;
  one.n_points = 1;
  CHECK(one.t_values() == std::vector<double>{-1.0});
}

TEST_CASE("band windows classify by frequency") {
  BandWindows w;
  CHECK(*w.classify(2.3) == Band::Excited);
  CHECK(*w.classify(3.7) == Band::GroundLow);
  CHECK(*w.classify(4.9) == Band::GroundHigh);
  CHECK(!w.classify(0.5).has_value());
  CHECK(!w.classify(7.0).has_value());
  CHECK(band_from_name(band_name(Band::GroundHigh)) == Band::GroundHigh);
  CHECK_THROWS_AS(band_from_name("nope"), MalformedInput);
}

TEST_CASE("peak multiplicities: 8 + 8 + 16 at the reference field") {
  const HamiltonianModel m = site2_table1();
  const PeakSet ps = predict_peaks(m, {-40, -13, 68});
  CHECK(ps.bands[0].size() == 8);
  CHECK(ps.bands[1].size() == 8);
  CHECK(ps.bands[2].size() == 16);
  CHECK(ps.annotated.size() == 32);
  for (const auto& band : ps.bands)
    CHECK(std::is_sorted(band.begin(), band.end()));
  // ground-high peaks lie above ground-low peaks
  CHECK(ps.bands[1].front() > ps.bands[0].back());
}

TEST_CASE("every peak is an eigenvalue difference of its subsite Hamiltonian") {
  const HamiltonianModel m = site2_table1();
  const ModelEngine engine(m);
  const Eigen::Vector3d b{25, -60, 31};
  const PeakSet ps = engine.peaks_at(b, 16);
  for (const Peak& p : ps.annotated) {
    const EnergyLevels lv = eigensystem(engine.subsite(p.state, p.subsite).at(b));
    CHECK(p.freq_mhz ==
          doctest::Approx(std::abs(lv.energies[p.level_b] - lv.energies[p.level_a]))
              .epsilon(1e-12));
    CHECK(p.lower_doublet >= 0);
    CHECK(p.lower_doublet <= 1);
  }
}

TEST_CASE("one-step doublet projection agrees with adiabatic continuation") {
  const HamiltonianModel m = site2_table1();
  const ModelEngine engine(m);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-80.0, 80.0);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Vector3d b{uni(rng), uni(rng), uni(rng)};
    PeakSet fast, slow;
    try {
      fast = engine.peaks_at(b, 1);
      slow = engine.peaks_at(b, 16);
    } catch (const DegenerateLevels&) {
      continue;
    }
    for (int band = 0; band < 3; ++band) {
      REQUIRE(fast.bands[band].size() == slow.bands[band].size());
      for (size_t i = 0; i < fast.bands[band].size(); ++i)
        CHECK(fast.bands[band][i] == doctest::Approx(slow.bands[band][i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("assign_doublets labels each doublet twice") {
  const HamiltonianModel m = site2_table1();
  const SubsiteHamiltonian sh = make_subsite_hamiltonian(m.ground, 1, m.c2);
  const auto labels = assign_doublets(sh, {12, -7, 33}, 8);
  std::array<int, 3> count{0, 0, 0};
  for (int l : labels) ++count[l];
  CHECK(count == std::array<int, 3>{2, 2, 2});
  // at small fields ascending levels keep the zero-field order 0,0,1,1,2,2
  const auto small = assign_doublets(sh, {0.5, 0.2, -0.3}, 1);
  CHECK(small == std::array<int, 6>{0, 0, 1, 1, 2, 2});
}

TEST_CASE("synthesize_dataset: determinism and noise statistics") {
  const HamiltonianModel m = site2_table1();
  SpiralScan scan;
  scan.n_points = 21;

  const FieldScanDataset clean = synthesize_dataset(m, scan, 0.0, 5);
  const ModelEngine engine(m);
  for (const auto& pt : clean.points) {
    const PeakSet ps = engine.peaks_at(pt.field, 1);
    for (int band = 0; band < 3; ++band)
      CHECK(pt.bands[band] == ps.bands[band]);
  }

  const FieldScanDataset a = synthesize_dataset(m, scan, 9.0, 5);
  const FieldScanDataset b = synthesize_dataset(m, scan, 9.0, 5);
  const FieldScanDataset c = synthesize_dataset(m, scan, 9.0, 6);
  double max_same = 0.0, max_diff = 0.0, rms = 0.0;
  long n = 0;
  for (size_t i = 0; i < a.points.size(); ++i)
    for (int band = 0; band < 3; ++band)
      for (size_t k = 0; k < a.points[i].bands[band].size(); ++k) {
        max_same = std::max(max_same, std::abs(a.points[i].bands[band][k] -
                                               b.points[i].bands[band][k]));
        max_diff = std::max(max_diff, std::abs(a.points[i].bands[band][k] -
                                               c.points[i].bands[band][k]));
        const double r = a.points[i].bands[band][k] - clean.points[i].bands[band][k];
        rms += r * r;
        ++n;
      }
  CHECK(max_same == 0.0);       // identical seed, identical bytes
  CHECK(max_diff > 1e-4);       // different seed, different noise
  rms = std::sqrt(rms / n) * 1000.0;
  CHECK(rms == doctest::Approx(9.0).epsilon(0.25)); // kHz, within 25%
}

TEST_CASE("dataset CSV round-trip with metadata sidecar") {
  const HamiltonianModel m = site2_table1();
  SpiralScan scan;
  scan.n_points = 11;
  const FieldScanDataset ds = synthesize_dataset(m, scan, 3.0, 17);
  const std::string path = temp_path("pryso_test_ds.csv");
  save_dataset_csv(ds, path);
  const FieldScanDataset back = load_dataset_csv(path);

  REQUIRE(back.points.size() == ds.points.size());
  for (size_t i = 0; i < ds.points.size(); ++i) {
    CHECK((back.points[i].field - ds.points[i].field).norm() < 1e-5);
    for (int band = 0; band < 3; ++band) {
      REQUIRE(back.points[i].bands[band].size() == ds.points[i].bands[band].size());
      for (size_t k = 0; k < ds.points[i].bands[band].size(); ++k)
        CHECK(back.points[i].bands[band][k] ==
              doctest::Approx(ds.points[i].bands[band][k]).epsilon(1e-8));
    }
  }
  CHECK(back.meta.noise_khz == doctest::Approx(3.0));
  CHECK(back.meta.seed == 17);
  CHECK(back.meta.model_hash == model_hash(m));

  std::remove(path.c_str());
  std::remove((path + ".meta.json").c_str());
  CHECK_THROWS_AS(load_dataset_csv(path), MalformedInput);

  // malformed rows are rejected with a row number
  const std::string bad = temp_path("pryso_test_bad.csv");
  {
    std::FILE* f = std::fopen(bad.c_str(), "w");
    std::fputs("index,t,bx,by,bz,band,freq_mhz\nx,y\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_dataset_csv(bad), MalformedInput);
  std::remove(bad.c_str());
}
