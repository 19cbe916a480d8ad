#include "pryso/zefoz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "json.hpp"
#include "pryso/errors.hpp"

namespace pryso {

using nlohmann::json;

namespace {

constexpr double kMHzToHz = 1e6;

void check_gap(const Vector6d& e, int level, double tol_mhz) {
  if (level > 0 && e[level] - e[level - 1] < tol_mhz)
    throw DegeneracyError("level gap below tolerance");
  if (level < 5 && e[level + 1] - e[level] < tol_mhz)
    throw DegeneracyError("level gap below tolerance");
}

}  // namespace

double transition_frequency(const SubsiteHamiltonian& sh, int li, int lj,
                            const Eigen::Vector3d& b) {
  Eigen::SelfAdjointEigenSolver<Matrix6c> solver(sh.at(b),
                                                 Eigen::EigenvaluesOnly);
  return std::abs(solver.eigenvalues()[lj] - solver.eigenvalues()[li]);
}

Eigen::Vector3d zeeman_gradient(const SubsiteHamiltonian& sh, int li, int lj,
                                const Eigen::Vector3d& b, double tol_mhz) {
  const EnergyLevels lv = eigensystem(sh.at(b));
  check_gap(lv.energies, li, tol_mhz);
  check_gap(lv.energies, lj, tol_mhz);
  Eigen::Vector3d s1;
  for (int k = 0; k < 3; ++k) {
    const auto& op = sh.zeeman_op[k]; // MHz/G
    const double di = (lv.vectors.col(li).adjoint() * op * lv.vectors.col(li))(0).real();
    const double dj = (lv.vectors.col(lj).adjoint() * op * lv.vectors.col(lj))(0).real();
    s1[k] = (dj - di) * kMHzToHz;
  }
  return s1;
}

Eigen::Matrix3d zeeman_curvature(const SubsiteHamiltonian& sh, int li, int lj,
                                 const Eigen::Vector3d& b, double tol_mhz) {
  const EnergyLevels lv = eigensystem(sh.at(b));
  check_gap(lv.energies, li, tol_mhz);
  check_gap(lv.energies, lj, tol_mhz);

  // second-order energy curvature of one level
  const auto level_curvature = [&](int level) {
    Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
    std::array<Eigen::Matrix<std::complex<double>, 6, 1>, 3> opv;
    for (int k = 0; k < 3; ++k) opv[k] = sh.zeeman_op[k] * lv.vectors.col(level);
    for (int m = 0; m < 6; ++m) {
      if (m == level) continue;
      const double gap = lv.energies[level] - lv.energies[m];
      if (std::abs(gap) < tol_mhz)
        throw DegeneracyError("intermediate-state gap below tolerance");
      std::array<std::complex<double>, 3> amp;
      for (int k = 0; k < 3; ++k)
        amp[k] = (lv.vectors.col(m).adjoint() * opv[k])(0);
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          c(k, l) += 2.0 * (std::conj(amp[k]) * amp[l]).real() / gap;
    }
    return c;
  };

  Eigen::Matrix3d s2 = (level_curvature(lj) - level_curvature(li)) * kMHzToHz;
  return 0.5 * (s2 + s2.transpose());
}

Eigen::Vector3d fd_gradient(const SubsiteHamiltonian& sh, int li, int lj,
                            const Eigen::Vector3d& b, double h) {
  // five-point stencil, O(h^4) truncation
  Eigen::Vector3d g;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[k] = h;
    const auto f = [&](double s) {
      return transition_frequency(sh, li, lj, b + s * e);
    };
    g[k] = (-f(2.0) + 8.0 * f(1.0) - 8.0 * f(-1.0) + f(-2.0)) / (12 * h) *
           kMHzToHz;
  }
  return g;
}

Eigen::Matrix3d fd_curvature(const SubsiteHamiltonian& sh, int li, int lj,
                             const Eigen::Vector3d& b, double h) {
  Eigen::Matrix3d c;
  const auto f = [&](const Eigen::Vector3d& x) {
    return transition_frequency(sh, li, lj, x);
  };
  for (int k = 0; k < 3; ++k)
    for (int l = k; l < 3; ++l) {
      Eigen::Vector3d ek = Eigen::Vector3d::Zero(), el = Eigen::Vector3d::Zero();
      ek[k] = h;
      el[l] = h;
      const double v = (f(b + ek + el) - f(b + ek - el) - f(b - ek + el) +
                        f(b - ek - el)) /
                       (4 * h * h) * kMHzToHz;
      c(k, l) = v;
      c(l, k) = v;
    }
  return c;
}

double s2_scalar_value(const Eigen::Matrix3d& s2) {
  const Eigen::Vector3d e =
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(s2).eigenvalues();
  return std::cbrt(std::abs(e[0] * e[1] * e[2]));
}

double project_t2(double s1, double s2, double db) {
  const double denom = M_PI * (s1 * db + s2 * db * db);
  if (!(denom > std::numeric_limits<double>::min()))
    return std::numeric_limits<double>::infinity();
  return 1.0 / denom;
}

namespace {

Eigen::Vector3d snap(const Eigen::Vector3d& b, double res) {
  if (res <= 0) return b;
  Eigen::Vector3d out;
  for (int k = 0; k < 3; ++k) out[k] = std::round(b[k] / res) * res;
  return out;
}

ZefozCandidate make_candidate(const SubsiteHamiltonian& sh, State state,
                              int subsite, int li, int lj,
                              const Eigen::Vector3d& b_exact,
                              const GridSpec& spec) {
  ZefozCandidate c;
  c.field_exact = b_exact;
  c.field = snap(b_exact, spec.report_resolution);
  c.state = state;
  c.subsite = subsite;
  c.level_i = li;
  c.level_j = lj;
  c.f_mhz = transition_frequency(sh, li, lj, c.field);
  c.s1 = zeeman_gradient(sh, li, lj, c.field, spec.degeneracy_tol_mhz);
  c.s2 = zeeman_curvature(sh, li, lj, c.field, spec.degeneracy_tol_mhz);
  c.s1_norm = c.s1.norm();
  c.s2_scalar = s2_scalar_value(c.s2);
  c.t2_s = project_t2(c.s1_norm, c.s2_scalar, spec.delta_b);
  return c;
}

}  // namespace

std::optional<ZefozCandidate> newton_refine(const SubsiteHamiltonian& sh,
                                            State state, int subsite, int li,
                                            int lj,
                                            const Eigen::Vector3d& b_start,
                                            const GridSpec& spec) {
  Eigen::Vector3d b = b_start;
  const double box = spec.extent * 1.2 + 10.0;
  for (int it = 0; it < spec.newton_cap; ++it) {
    Eigen::Vector3d s1;
    Eigen::Matrix3d s2;
    try {
      s1 = zeeman_gradient(sh, li, lj, b, spec.degeneracy_tol_mhz);
      if (s1.norm() < spec.gradient_threshold)
        return make_candidate(sh, state, subsite, li, lj, b, spec);
      s2 = zeeman_curvature(sh, li, lj, b, spec.degeneracy_tol_mhz);
    } catch (const DegeneracyError&) {
      s1 = fd_gradient(sh, li, lj, b);
      if (s1.norm() < spec.gradient_threshold)
        return make_candidate(sh, state, subsite, li, lj, b, spec);
      s2 = fd_curvature(sh, li, lj, b);
    }
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(s2);
    if (!lu.isInvertible())
      throw SingularCurvature("newton_refine: curvature tensor is singular");
    b -= lu.solve(s1);
    if (b.cwiseAbs().maxCoeff() > box) return std::nullopt; // left the box
  }
  return std::nullopt; // NoZero: iteration cap
}

std::vector<ZefozCandidate> grid_search(const HamiltonianModel& model,
                                        const GridSpec& spec) {
  std::vector<ZefozCandidate> out;
  if (spec.extent <= 0 || spec.step <= 0) return out;
  const int half = (int)std::floor(spec.extent / spec.step);
  const int n = 2 * half + 1;
  const auto node = [&](int i) { return (i - half) * spec.step; };

  const ModelEngine engine(model, spec.state == State::Ground,
                           spec.state == State::Excited);

  struct PairRef {
    int li, lj;
  };
  std::vector<PairRef> pairs;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) pairs.push_back({i, j});

  const int nthreads = spec.threads > 0
                           ? spec.threads
                           : std::max(1u, std::thread::hardware_concurrency());

  for (int subsite = 1; subsite <= 2; ++subsite) {
    const SubsiteHamiltonian& sh = engine.subsite(spec.state, subsite);
    // |s1| per pair at every node (inf where the degeneracy guard trips)
    std::vector<std::vector<float>> norms(
        pairs.size(),
        std::vector<float>(size_t(n) * n * n,
                           std::numeric_limits<float>::infinity()));

    const auto worker = [&](int z0, int z1) {
      for (int iz = z0; iz < z1; ++iz)
        for (int iy = 0; iy < n; ++iy)
          for (int ix = 0; ix < n; ++ix) {
            const Eigen::Vector3d b{node(ix), node(iy), node(iz)};
            const EnergyLevels lv = eigensystem(sh.at(b));
            // expectation values of the Zeeman operators in every level
            Eigen::Matrix<double, 6, 3> diag;
            for (int k = 0; k < 3; ++k) {
              const Matrix6c t = lv.vectors.adjoint() * sh.zeeman_op[k] * lv.vectors;
              for (int m = 0; m < 6; ++m) diag(m, k) = t(m, m).real();
            }
            const size_t off = (size_t(iz) * n + iy) * n + ix;
            for (size_t p = 0; p < pairs.size(); ++p) {
              const auto [li, lj] = pairs[p];
              const double gap_i =
                  std::min(li > 0 ? lv.energies[li] - lv.energies[li - 1] : 1e9,
                           lv.energies[li + 1] - lv.energies[li]);
              const double gap_j =
                  std::min(lv.energies[lj] - lv.energies[lj - 1],
                           lj < 5 ? lv.energies[lj + 1] - lv.energies[lj] : 1e9);
              if (gap_i < spec.degeneracy_tol_mhz || gap_j < spec.degeneracy_tol_mhz)
                continue;
              const Eigen::Vector3d s1 =
                  (diag.row(lj) - diag.row(li)).transpose() * kMHzToHz;
              norms[p][off] = (float)s1.norm();
            }
          }
    };
    std::vector<std::thread> threads;
    const int chunk = (n + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const int z0 = t * chunk, z1 = std::min(n, z0 + chunk);
      if (z0 < z1) threads.emplace_back(worker, z0, z1);
    }
    for (auto& t : threads) t.join();

    // launch Newton from 6-neighborhood local minima of |s1|
    std::vector<ZefozCandidate> found;
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto& g = norms[p];
      const auto at = [&](int ix, int iy, int iz) {
        return g[(size_t(iz) * n + iy) * n + ix];
      };
      for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
          for (int ix = 0; ix < n; ++ix) {
            const float v = at(ix, iy, iz);
            if (!std::isfinite(v)) continue;
            const auto better = [&](int jx, int jy, int jz) {
              if (jx < 0 || jy < 0 || jz < 0 || jx >= n || jy >= n || jz >= n)
                return false;
              return at(jx, jy, jz) < v;
            };
            if (better(ix - 1, iy, iz) || better(ix + 1, iy, iz) ||
                better(ix, iy - 1, iz) || better(ix, iy + 1, iz) ||
                better(ix, iy, iz - 1) || better(ix, iy, iz + 1))
              continue;
            try {
              const auto cand = newton_refine(
                  sh, spec.state, subsite, pairs[p].li, pairs[p].lj,
                  {node(ix), node(iy), node(iz)}, spec);
              if (cand) found.push_back(*cand);
            } catch (const SingularCurvature&) {
              // saddle-free start not available from this node
            } catch (const DegeneracyError&) {
            }
          }
    }
    // merge duplicates: same pair, fields within dedup radius
    for (const auto& c : found) {
      bool merged = false;
      for (auto& kept : out) {
        if (kept.subsite == c.subsite && kept.level_i == c.level_i &&
            kept.level_j == c.level_j &&
            (kept.field_exact - c.field_exact).norm() < spec.dedup_radius) {
          if (c.s1_norm < kept.s1_norm) kept = c;
          merged = true;
          break;
        }
      }
      if (!merged) out.push_back(c);
    }
  }

  std::sort(out.begin(), out.end(),
            [](const ZefozCandidate& a, const ZefozCandidate& b) {
              return a.t2_s > b.t2_s;
            });
  return out;
}

void save_candidates_csv(const std::vector<ZefozCandidate>& cands,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write candidates: " + path);
  out << "bx,by,bz,state,subsite,level_i,level_j,f_mhz,s1_hz_per_g,"
         "s2_hz_per_g2,t2_s\n";
  char line[320];
  for (const auto& c : cands) {
    std::snprintf(line, sizeof line,
                  "%.4f,%.4f,%.4f,%s,%d,%d,%d,%.6f,%.6f,%.6f,%.6f\n",
                  c.field.x(), c.field.y(), c.field.z(),
                  c.state == State::Ground ? "ground" : "excited", c.subsite,
                  c.level_i, c.level_j, c.f_mhz, c.s1_norm, c.s2_scalar,
                  c.t2_s);
    out << line;
  }
}

void save_candidates_json(const std::vector<ZefozCandidate>& cands,
                          const GridSpec& spec, const std::string& path) {
  json arr = json::array();
  for (const auto& c : cands) {
    json s2 = json::array();
    for (int i = 0; i < 3; ++i)
      s2.push_back({c.s2(i, 0), c.s2(i, 1), c.s2(i, 2)});
    arr.push_back({{"field_gauss", {c.field.x(), c.field.y(), c.field.z()}},
                   {"field_exact_gauss",
                    {c.field_exact.x(), c.field_exact.y(), c.field_exact.z()}},
                   {"state", c.state == State::Ground ? "ground" : "excited"},
                   {"subsite", c.subsite},
                   {"level_i", c.level_i},
                   {"level_j", c.level_j},
                   {"f_mhz", c.f_mhz},
                   {"s1_hz_per_g", {c.s1.x(), c.s1.y(), c.s1.z()}},
                   {"s1_norm_hz_per_g", c.s1_norm},
                   {"s2_hz_per_g2", s2},
                   {"s2_scalar_hz_per_g2", c.s2_scalar},
                   {"t2_s", c.t2_s}});
  }
  json j = {{"candidates", arr},
            {"grid",
             {{"extent_gauss", spec.extent},
              {"step_gauss", spec.step},
              {"gradient_threshold_hz_per_g", spec.gradient_threshold},
              {"delta_b_gauss", spec.delta_b},
              {"report_resolution_gauss", spec.report_resolution},
              {"state", spec.state == State::Ground ? "ground" : "excited"}}}};
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

void save_scatter_csv(const std::vector<ZefozCandidate>& cands,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write scatter: " + path);
  out << "b_mag_gauss,s2_scalar_hz_per_g2,f_mhz,t2_s\n";
  char line[160];
  for (const auto& c : cands) {
    std::snprintf(line, sizeof line, "%.4f,%.6f,%.6f,%.6f\n", c.field.norm(),
                  c.s2_scalar, c.f_mhz, c.t2_s);
    out << line;
  }
}

}  // namespace pryso
