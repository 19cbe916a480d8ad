#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "pryso/errors.hpp"
#include "pryso/zefoz.hpp"

using namespace pryso;

namespace {

SubsiteHamiltonian ground_subsite1() {
  const HamiltonianModel m = site2_table1();
  return make_subsite_hamiltonian(m.ground, 1, m.c2);
}

}  // namespace

TEST_CASE("projected T2 formula") {
  CHECK(project_t2(0.36, 19.5, 0.08) == doctest::Approx(2.072329988).epsilon(1e-8));
  CHECK(project_t2(0.0, 60.0, 0.08) == doctest::Approx(0.828931995).epsilon(1e-8));
  CHECK(std::isinf(project_t2(0.0, 0.0, 0.08)));
  // monotone: more sensitivity, less coherence
  CHECK(project_t2(1.0, 20.0, 0.08) < project_t2(0.1, 20.0, 0.08));
}

TEST_CASE("S2 scalar is the geometric mean of the absolute eigenvalues") {
  Eigen::Matrix3d d = Eigen::Vector3d(1.0, -8.0, 27.0).asDiagonal();
  CHECK(s2_scalar_value(d) == doctest::Approx(6.0).epsilon(1e-12));
  // invariant under rotation
  const Eigen::Matrix3d r = rotation_matrix({0.3, 1.0, -0.7});
  CHECK(s2_scalar_value(r * d * r.transpose()) == doctest::Approx(6.0).epsilon(1e-10));
}

TEST_CASE("transition frequency matches the eigensystem") {
  const SubsiteHamiltonian sh = ground_subsite1();
  const Eigen::Vector3d b{120, -45, 210};
  const EnergyLevels lv = eigensystem(sh.at(b));
  for (int i = 0; i < 5; ++i)
    CHECK(transition_frequency(sh, i, i + 1, b) ==
          doctest::Approx(lv.energies[i + 1] - lv.energies[i]).epsilon(1e-12));
}

TEST_CASE("perturbation-theory derivatives match finite differences") {
  const SubsiteHamiltonian sh = ground_subsite1();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(-400.0, 400.0);
  int tested = 0;
  for (int trial = 0; trial < 200 && tested < 30; ++trial) {
    const Eigen::Vector3d b{uni(rng), uni(rng), uni(rng)};
    for (int pair : {1, 3}) {
      Eigen::Vector3d g;
      Eigen::Matrix3d h;
      try {
        g = zeeman_gradient(sh, pair, pair + 1, b);
        h = zeeman_curvature(sh, pair, pair + 1, b);
      } catch (const DegeneracyError&) {
        continue;
      }
      const Eigen::Vector3d gfd = fd_gradient(sh, pair, pair + 1, b);
      const Eigen::Matrix3d hfd = fd_curvature(sh, pair, pair + 1, b);
      CHECK((g - gfd).norm() / std::max(gfd.norm(), 1.0) < 1e-6);
      CHECK((h - hfd).norm() / std::max(hfd.norm(), 1.0) < 1e-4);
      ++tested;
    }
  }
  CHECK(tested >= 30);

  // at zero field every level is doubly degenerate
  CHECK_THROWS_AS(zeeman_gradient(sh, 2, 3, Eigen::Vector3d::Zero()), DegeneracyError);
}

TEST_CASE("Taylor expansion of the transition frequency is second order") {
  const SubsiteHamiltonian sh = ground_subsite1();
  const Eigen::Vector3d b{150, 70, 260};
  const int i = 3, j = 4;
  const double f0 = transition_frequency(sh, i, j, b);
  const Eigen::Vector3d s1 = zeeman_gradient(sh, i, j, b) / 1e6;   // MHz/G
  const Eigen::Matrix3d s2 = zeeman_curvature(sh, i, j, b) / 1e6;  // MHz/G^2
  const Eigen::Vector3d dir = Eigen::Vector3d(0.4, -0.7, 0.59).normalized();

  const auto residual = [&](double eps) {
    const Eigen::Vector3d d = eps * dir;
    const double f = transition_frequency(sh, i, j, b + d);
    return std::abs(f - f0 - s1.dot(d) - 0.5 * d.dot(s2 * d));
  };
  // cubic scaling: halving the step shrinks the residual ~8x
  const double r2 = residual(2.0), r1 = residual(1.0);
  CHECK(r2 / r1 == doctest::Approx(8.0).epsilon(0.25));
  CHECK(r1 < 1e-6); // the residual is the genuine cubic term, ~2e-7 MHz here
}

TEST_CASE("Newton refinement lands on the published ZEFOZ point") {
  const SubsiteHamiltonian sh = ground_subsite1();
  GridSpec spec;
  const auto cand = newton_refine(sh, State::Ground, 1, 3, 4, {250, 75, 350}, spec);
  REQUIRE(cand.has_value());
  // frozen values from an independent numpy implementation
  CHECK((cand->field_exact - Eigen::Vector3d(255.60633, 80.55327, 341.06338)).norm() < 0.01);
  CHECK((cand->field - Eigen::Vector3d(255.60, 80.55, 341.05)).norm() < 1e-9);
  CHECK(cand->f_mhz == doctest::Approx(3.126493).epsilon(1e-5));
  CHECK(cand->s1_norm == doctest::Approx(0.212227).epsilon(1e-4));
  CHECK(cand->s2_scalar == doctest::Approx(19.684483).epsilon(1e-4));
  CHECK(cand->t2_s == doctest::Approx(2.226584).epsilon(1e-4));
  // the converged gradient at the exact zero is below threshold
  CHECK(zeeman_gradient(sh, 3, 4, cand->field_exact).norm() < spec.gradient_threshold);

  // a start outside the box that walks away returns nothing
  GridSpec tiny = spec;
  tiny.extent = 5.0;
  CHECK(!newton_refine(sh, State::Ground, 1, 3, 4, {4, 4, 4}, tiny).has_value());
}

TEST_CASE("grid search finds, deduplicates and ranks candidates") {
  const HamiltonianModel m = site2_table1();
  GridSpec spec;
  const auto cands = grid_search(m, spec);
  REQUIRE(!cands.empty());

  // ranked by projected T2, descending
  for (size_t i = 1; i < cands.size(); ++i)
    CHECK(cands[i - 1].t2_s >= cands[i].t2_s);

  // the published point is present
  bool found = false;
  for (const auto& c : cands)
    if ((c.field - Eigen::Vector3d(255.60, 80.55, 341.05)).norm() < 2.0) found = true;
  CHECK(found);

  // deduplication: no two candidates of the same transition within the radius
  for (size_t i = 0; i < cands.size(); ++i)
    for (size_t j = i + 1; j < cands.size(); ++j)
      if (cands[i].state == cands[j].state && cands[i].subsite == cands[j].subsite &&
          cands[i].level_i == cands[j].level_i && cands[i].level_j == cands[j].level_j)
        CHECK((cands[i].field_exact - cands[j].field_exact).norm() >= spec.dedup_radius);

  // fields are symmetric: -B is a ZEFOZ point whenever B is
  for (const auto& c : cands) {
    bool mirrored = false;
    for (const auto& d : cands)
      if (c.state == d.state && c.level_i == d.level_i && c.level_j == d.level_j &&
          (c.field_exact + d.field_exact).norm() < 0.5)
        mirrored = true;
    CHECK(mirrored);
  }

  // writers produce well-formed files
  const auto tmp = std::filesystem::temp_directory_path();
  const std::string csv = (tmp / "pryso_zf.csv").string();
  const std::string jsn = (tmp / "pryso_zf.json").string();
  const std::string sc = (tmp / "pryso_zf_scatter.csv").string();
  save_candidates_csv(cands, csv);
  save_candidates_json(cands, spec, jsn);
  save_scatter_csv(cands, sc);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "bx,by,bz,state,subsite,level_i,level_j,f_mhz,s1_hz_per_g,s2_hz_per_g2,t2_s");
  size_t rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == cands.size());
  std::remove(csv.c_str());
  std::remove(jsn.c_str());
  std::remove(sc.c_str());
}

TEST_CASE("empty grid produces an empty candidate list") {
  const HamiltonianModel m = site2_table1();
  GridSpec spec;
  spec.extent = 0.0; // only the (degenerate) origin
  CHECK(grid_search(m, spec).empty());
}
