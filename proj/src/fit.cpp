#include "pryso/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <random>

#include "json.hpp"
#include "pryso/errors.hpp"
#include "pryso/simplex.hpp"

namespace pryso {

using nlohmann::json;

namespace {

constexpr double kBadCost = 1e9;

double deg_get(double rad) { return rad2deg(rad); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

const std::vector<ParamDef>& model_params() {
  static const std::vector<ParamDef> defs = {
      // ground state
      {"ground.alpha_M_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.ground.zeeman_angles.alpha); },
       [](HamiltonianModel& m, double v) { m.ground.zeeman_angles.alpha = deg2rad(v); }},
      {"ground.beta_M_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.ground.zeeman_angles.beta); },
       [](HamiltonianModel& m, double v) { m.ground.zeeman_angles.beta = deg2rad(v); }},
      {"ground.gamma_M_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.ground.zeeman_angles.gamma); },
       [](HamiltonianModel& m, double v) { m.ground.zeeman_angles.gamma = deg2rad(v); }},
      {"ground.g1_khz_per_g", ParamKind::GFactor,
       [](const HamiltonianModel& m) { return m.ground.g.g1; },
       [](HamiltonianModel& m, double v) { m.ground.g.g1 = v; }},
      {"ground.g2_khz_per_g", ParamKind::GFactor,
       [](const HamiltonianModel& m) { return m.ground.g.g2; },
       [](HamiltonianModel& m, double v) { m.ground.g.g2 = v; }},
      {"ground.g3_khz_per_g", ParamKind::GFactor,
       [](const HamiltonianModel& m) { return m.ground.g.g3; },
       [](HamiltonianModel& m, double v) { m.ground.g.g3 = v; }},
      {"ground.alpha_Q_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.ground.quad_angles.alpha); },
       [](HamiltonianModel& m, double v) { m.ground.quad_angles.alpha = deg2rad(v); }},
      {"ground.beta_Q_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.ground.quad_angles.beta); },
       [](HamiltonianModel& m, double v) { m.ground.quad_angles.beta = deg2rad(v); }},
      {"ground.gamma_Q_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.ground.quad_angles.gamma); },
       [](HamiltonianModel& m, double v) { m.ground.quad_angles.gamma = deg2rad(v); }},
      {"ground.e_mhz", ParamKind::EDValue,
       [](const HamiltonianModel& m) { return m.ground.q.e; },
       [](HamiltonianModel& m, double v) { m.ground.q.e = v; }},
      {"ground.d_mhz", ParamKind::EDValue,
       [](const HamiltonianModel& m) { return m.ground.q.d; },
       [](HamiltonianModel& m, double v) { m.ground.q.d = v; }},
      // shared C2 orientation
      {"c2.theta_deg", ParamKind::C2Angle,
       [](const HamiltonianModel& m) { return deg_get(m.c2.theta); },
       [](HamiltonianModel& m, double v) { m.c2.theta = deg2rad(v); }},
      {"c2.phi_deg", ParamKind::C2Angle,
       [](const HamiltonianModel& m) { return deg_get(m.c2.phi); },
       [](HamiltonianModel& m, double v) { m.c2.phi = deg2rad(v); }},
      // excited state
      {"excited.alpha_M_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.excited.zeeman_angles.alpha); },
       [](HamiltonianModel& m, double v) { m.excited.zeeman_angles.alpha = deg2rad(v); }},
      {"excited.beta_M_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.excited.zeeman_angles.beta); },
       [](HamiltonianModel& m, double v) { m.excited.zeeman_angles.beta = deg2rad(v); }},
      {"excited.gamma_M_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.excited.zeeman_angles.gamma); },
       [](HamiltonianModel& m, double v) { m.excited.zeeman_angles.gamma = deg2rad(v); }},
      {"excited.g1_khz_per_g", ParamKind::GFactor,
       [](const HamiltonianModel& m) { return m.excited.g.g1; },
       [](HamiltonianModel& m, double v) { m.excited.g.g1 = v; }},
      {"excited.g2_khz_per_g", ParamKind::GFactor,
       [](const HamiltonianModel& m) { return m.excited.g.g2; },
       [](HamiltonianModel& m, double v) { m.excited.g.g2 = v; }},
      {"excited.g3_khz_per_g", ParamKind::GFactor,
       [](const HamiltonianModel& m) { return m.excited.g.g3; },
       [](HamiltonianModel& m, double v) { m.excited.g.g3 = v; }},
      {"excited.alpha_Q_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.excited.quad_angles.alpha); },
       [](HamiltonianModel& m, double v) { m.excited.quad_angles.alpha = deg2rad(v); }},
      {"excited.beta_Q_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.excited.quad_angles.beta); },
       [](HamiltonianModel& m, double v) { m.excited.quad_angles.beta = deg2rad(v); }},
      {"excited.gamma_Q_deg", ParamKind::Angle,
       [](const HamiltonianModel& m) { return deg_get(m.excited.quad_angles.gamma); },
       [](HamiltonianModel& m, double v) { m.excited.quad_angles.gamma = deg2rad(v); }},
      {"excited.e_mhz", ParamKind::EDValue,
       [](const HamiltonianModel& m) { return m.excited.q.e; },
       [](HamiltonianModel& m, double v) { m.excited.q.e = v; }},
      {"excited.d_mhz", ParamKind::EDValue,
       [](const HamiltonianModel& m) { return m.excited.q.d; },
       [](HamiltonianModel& m, double v) { m.excited.q.d = v; }},
  };
  return defs;
}

Eigen::VectorXd pack_params(const HamiltonianModel& m) {
  const auto& defs = model_params();
  Eigen::VectorXd x(defs.size());
  for (size_t i = 0; i < defs.size(); ++i) x(i) = defs[i].get(m);
  return x;
}

HamiltonianModel unpack_params(const HamiltonianModel& base,
                               const Eigen::VectorXd& x) {
  HamiltonianModel m = base;
  const auto& defs = model_params();
  for (size_t i = 0; i < defs.size(); ++i) defs[i].set(m, x(i));
  return m;
}

double FitConfig::scale_for(ParamKind k) const {
  switch (k) {
    case ParamKind::Angle: return angle_scale_deg;
    case ParamKind::GFactor: return g_scale;
    case ParamKind::EDValue: return ed_scale;
    case ParamKind::C2Angle: return c2_scale_deg;
  }
  return 1.0;
}

std::vector<std::pair<int, int>> align_sorted(const std::vector<double>& a,
                                              const std::vector<double>& b) {
  const bool a_small = a.size() <= b.size();
  const std::vector<double>& s = a_small ? a : b;
  const std::vector<double>& l = a_small ? b : a;
  const int m = (int)s.size(), n = (int)l.size();
  std::vector<std::pair<int, int>> out;
  if (m == 0) return out;
  if (m == n) {
    // complete one-to-one matching of sorted lists: in-order is optimal
    out.reserve(m);
    for (int i = 0; i < m; ++i) out.emplace_back(i, i);
    return out;
  }

  // dp(i,j): min cost of matching first i of s into first j of l, in order
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dp(m + 1, std::vector<double>(n + 1, inf));
  for (int j = 0; j <= n; ++j) dp[0][j] = 0.0;
  for (int i = 1; i <= m; ++i)
    for (int j = i; j <= n; ++j) {
      const double d = s[i - 1] - l[j - 1];
      dp[i][j] = std::min(dp[i][j - 1], dp[i - 1][j - 1] + d * d);
    }
  // backtrack
  int i = m, j = n;
  while (i > 0) {
    const double d = s[i - 1] - l[j - 1];
    if (j > i && dp[i][j] == dp[i][j - 1]) {
      --j;
    } else {
      out.emplace_back(i - 1, j - 1);
      --i;
      --j;
    }
  }
  std::reverse(out.begin(), out.end());
  if (!a_small)
    for (auto& p : out) std::swap(p.first, p.second);
  return out;
}

namespace {

struct BandUse {
  bool ground = true;
  bool excited = true;

  bool band(Band b) const {
    return b == Band::Excited ? excited : ground;
  }
};

/// Fast cost used inside the annealing loop (no assignment bookkeeping).
double eval_cost_khz(const ModelEngine& engine, const FieldScanDataset& data,
                     const BandUse& use, double penalty_mhz) {
  double total = 0.0;
  long denom = 0;
  for (const auto& pt : data.points) {
    const PeakSet ps = engine.peaks_at(pt.field, 1);
    for (int band = 0; band < 3; ++band) {
      if (!use.band(static_cast<Band>(band))) continue;
      const auto& obs = pt.bands[band];
      const auto& pred = ps.bands[band];
      if (obs.empty() && pred.empty()) continue;
      const auto pairs = align_sorted(obs, pred);
      for (const auto& [oi, pi] : pairs) {
        const double d = obs[oi] - pred[pi];
        total += d * d;
      }
      const long un = (long)std::max(obs.size(), pred.size()) - (long)pairs.size();
      total += un * penalty_mhz * penalty_mhz;
      denom += (long)pairs.size() + un;
    }
  }
  if (denom == 0) throw EmptyDataset("cost: no peaks in the selected bands");
  return std::sqrt(total / denom) * 1000.0;
}

}  // namespace

CostResult cost(const HamiltonianModel& model, const FieldScanDataset& data,
                const FitConfig& cfg) {
  if (data.points.empty()) throw EmptyDataset("cost: dataset has no points");
  const ModelEngine engine(model);
  CostResult res;
  double total = 0.0, matched_sq = 0.0;
  long denom = 0;
  for (const auto& pt : data.points) {
    const PeakSet ps = engine.peaks_at(pt.field, 1);
    std::array<Assignment::BandPairs, 3> bands;
    for (int band = 0; band < 3; ++band) {
      const auto& obs = pt.bands[band];
      const auto& pred = ps.bands[band];
      if (obs.empty() && pred.empty()) continue;
      auto pairs = align_sorted(obs, pred);
      for (const auto& [oi, pi] : pairs) {
        const double d = obs[oi] - pred[pi];
        total += d * d;
        matched_sq += d * d;
      }
      const int un = (int)std::max(obs.size(), pred.size()) - (int)pairs.size();
      total += un * cfg.unmatched_penalty_mhz * cfg.unmatched_penalty_mhz;
      denom += (long)pairs.size() + un;
      res.assignment.total_matched += (int)pairs.size();
      res.assignment.total_unmatched += un;
      bands[band].pairs = std::move(pairs);
      bands[band].unmatched = un;
    }
    res.assignment.points.push_back(std::move(bands));
  }
  if (denom == 0) throw EmptyDataset("cost: dataset has no peaks");
  res.cost_khz = std::sqrt(total / denom) * 1000.0;
  res.rms_khz =
      res.assignment.total_matched > 0
          ? std::sqrt(matched_sq / res.assignment.total_matched) * 1000.0
          : 0.0;
  return res;
}

namespace {

struct StageRun {
  HamiltonianModel model;
  double cost_khz = 0.0;
  long evals = 0;
};

/// One annealing run over the parameter subset `idx`, then optional simplex
/// polish. Deterministic given `seed`.
StageRun run_stage(const FieldScanDataset& data, const FitConfig& cfg,
                   const HamiltonianModel& init, const std::vector<int>& idx,
                   const BandUse& use, std::uint64_t seed) {
  const auto& defs = model_params();
  long evals = 0;

  Eigen::VectorXd x0(idx.size());
  const Eigen::VectorXd full0 = pack_params(init);
  for (size_t i = 0; i < idx.size(); ++i) x0(i) = full0(idx[i]);

  const auto model_of = [&](const Eigen::VectorXd& x) {
    HamiltonianModel m = init;
    for (size_t i = 0; i < idx.size(); ++i) defs[idx[i]].set(m, x(i));
    return m;
  };
  const auto costf = [&](const Eigen::VectorXd& x) -> double {
    ++evals;
    try {
      const ModelEngine engine(model_of(x), use.ground, use.excited);
      return eval_cost_khz(engine, data, use, cfg.unmatched_penalty_mhz);
    } catch (const DegenerateLevels&) {
      return kBadCost;
    }
  };

  Eigen::VectorXd scales(idx.size());
  for (size_t i = 0; i < idx.size(); ++i)
    scales(i) = cfg.scale_for(defs[idx[i]].kind);

  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, (int)idx.size() - 1);

  Eigen::VectorXd x = x0;
  double c = costf(x);
  Eigen::VectorXd best_x = x;
  double best_c = c;

  // initial temperature: ~80% acceptance of typical uphill moves
  double t0 = cfg.initial_temp;
  if (t0 <= 0.0) {
    double up = 0.0;
    int nup = 0;
    for (int s = 0; s < 60; ++s) {
      Eigen::VectorXd xp = x;
      const int k = pick(rng);
      xp(k) += scales(k) * gauss(rng);
      const double cp = costf(xp);
      if (cp > c && cp < kBadCost) {
        up += cp - c;
        ++nup;
      }
    }
    t0 = nup > 0 ? (up / nup) / std::log(1.0 / 0.8) : 1.0;
  }

  for (double t = t0; t > t0 * cfg.min_temp_fraction && evals < cfg.max_evals;
       t *= cfg.cooling) {
    for (int s = 0; s < cfg.steps_per_temp && evals < cfg.max_evals; ++s) {
      Eigen::VectorXd xp = x;
      const int k = pick(rng);
      xp(k) += scales(k) * gauss(rng);
      const double cp = costf(xp);
      if (cp <= c || uni(rng) < std::exp(-(cp - c) / t)) {
        x = xp;
        c = cp;
        if (c < best_c) {
          best_c = c;
          best_x = x;
        }
      }
    }
  }

  if (cfg.polish) {
    SimplexOptions sopt;
    sopt.xtol = 1e-9;
    const SimplexResult sr = nelder_mead(costf, best_x, 0.02 * scales, sopt);
    if (sr.fval < best_c) {
      best_c = sr.fval;
      best_x = sr.x;
    }
  }

  return {model_of(best_x), best_c, evals};
}

StageRun best_of_restarts(const FieldScanDataset& data, const FitConfig& cfg,
                          const HamiltonianModel& init,
                          const std::vector<int>& idx, const BandUse& use) {
  const int n = std::max(1, cfg.restarts);
  std::vector<std::future<StageRun>> futs;
  futs.reserve(n);
  for (int r = 0; r < n; ++r) {
    const std::uint64_t seed = splitmix64(cfg.seed + 0x1000 * (r + 1));
    futs.push_back(std::async(n > 1 ? std::launch::async : std::launch::deferred,
                              [&, seed] { return run_stage(data, cfg, init, idx, use, seed); }));
  }
  StageRun best;
  best.cost_khz = std::numeric_limits<double>::infinity();
  for (auto& f : futs) {
    StageRun r = f.get();
    best.evals += r.evals;
    if (r.cost_khz < best.cost_khz) {
      best.model = r.model;
      best.cost_khz = r.cost_khz;
    }
  }
  return best;
}

}  // namespace

FitResult anneal(const FieldScanDataset& data, const FitConfig& cfg,
                 const HamiltonianModel& init) {
  if (data.points.empty()) throw EmptyDataset("anneal: dataset has no points");
  std::vector<int> ground_idx, excited_idx, all_idx;
  for (int i = 0; i < 13; ++i) ground_idx.push_back(i);
  for (int i = 13; i < 24; ++i) excited_idx.push_back(i);
  for (int i = 0; i < 24; ++i) all_idx.push_back(i);

  FitResult result;
  long evals = 0;
  HamiltonianModel model = init;
  if (cfg.staged) {
    BandUse ground_only{true, false};
    const StageRun s1 = best_of_restarts(data, cfg, model, ground_idx, ground_only);
    evals += s1.evals;
    model = s1.model;
    BandUse excited_only{false, true};
    const StageRun s2 = best_of_restarts(data, cfg, model, excited_idx, excited_only);
    evals += s2.evals;
    model = s2.model;
  } else {
    const StageRun s = best_of_restarts(data, cfg, model, all_idx, BandUse{});
    evals += s.evals;
    model = s.model;
  }

  // report the equivalent parametrization nearest the starting model
  model.ground = nearest_spectral_equivalent(model.ground, init.ground);
  model.excited = nearest_spectral_equivalent(model.excited, init.excited);

  const CostResult final_cost = cost(model, data, cfg);
  result.model = model;
  result.rms_khz = final_cost.rms_khz;
  result.cost_khz = final_cost.cost_khz;
  result.unmatched = final_cost.assignment.total_unmatched;
  result.evaluations = evals;
  result.converged = final_cost.cost_khz <= cfg.rms_ceiling_khz;
  result.seed = cfg.seed;
  result.ambiguity_note =
      "parameters are one representative of a spectrum-equivalence class; "
      "see canonical_ambiguity_report";
  for (const auto& d : model_params()) result.param_names.emplace_back(d.name);

  try {
    const CovarianceResult cv = covariance(model, data, cfg);
    result.covariance = cv.covariance;
    result.std_errors = cv.std_errors;
  } catch (const SingularJacobian&) {
    result.covariance = Eigen::MatrixXd::Zero(24, 24);
    result.std_errors = Eigen::VectorXd::Zero(24);
  }
  return result;
}

CovarianceResult covariance(const HamiltonianModel& model,
                            const FieldScanDataset& data,
                            const FitConfig& cfg) {
  const auto& defs = model_params();
  const int np = (int)defs.size();
  const CostResult base = cost(model, data, cfg);
  const int nm = base.assignment.total_matched;
  if (nm == 0) throw EmptyDataset("covariance: no matched peaks");

  // predicted band arrays for a given model, in dataset point order
  const auto predict_all = [&](const HamiltonianModel& m) {
    std::vector<std::array<std::vector<double>, 3>> out;
    const ModelEngine engine(m);
    out.reserve(data.points.size());
    for (const auto& pt : data.points)
      out.push_back(engine.peaks_at(pt.field, 1).bands);
    return out;
  };

  Eigen::MatrixXd jac(nm, np);
  const Eigen::VectorXd x = pack_params(model);
  for (int p = 0; p < np; ++p) {
    const double h = 1e-4 * cfg.scale_for(defs[p].kind);
    Eigen::VectorXd xp = x, xm = x;
    xp(p) += h;
    xm(p) -= h;
    const auto plus = predict_all(unpack_params(model, xp));
    const auto minus = predict_all(unpack_params(model, xm));
    int row = 0;
    for (size_t ptn = 0; ptn < data.points.size(); ++ptn)
      for (int band = 0; band < 3; ++band)
        for (const auto& [oi, pi] : base.assignment.points[ptn][band].pairs)
          jac(row++, p) = (plus[ptn][band][pi] - minus[ptn][band][pi]) / (2 * h);
  }

  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  if (emin <= 1e-12 * emax) {
    std::string dir = "null direction:";
    const Eigen::VectorXd v = es.eigenvectors().col(0);
    for (int i = 0; i < np; ++i)
      if (std::abs(v(i)) > 0.2)
        dir += std::string(" ") + defs[i].name;
    throw SingularJacobian("covariance: J^T J is singular; " + dir);
  }

  const double sigma_mhz = base.rms_khz / 1000.0;
  CovarianceResult out;
  out.covariance = sigma_mhz * sigma_mhz * jtj.inverse();
  out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

namespace {

double wrap_pi(double a) {
  a = std::fmod(a + M_PI, 2 * M_PI);
  if (a <= 0) a += 2 * M_PI;
  return a - M_PI;
}

/// Both Euler-angle branches of a rotation: R(a,b,g) == R(a-pi,-b,g-pi).
std::vector<EulerAngles> euler_branches(const Eigen::Matrix3d& r) {
  const EulerAngles e = euler_from_rotation(r);
  return {e, {wrap_pi(e.alpha - M_PI), -e.beta, wrap_pi(e.gamma - M_PI)}};
}

double euler_distance_sq(const EulerAngles& a, const EulerAngles& b) {
  const double da = wrap_pi(a.alpha - b.alpha);
  const double db = wrap_pi(a.beta - b.beta);
  const double dg = wrap_pi(a.gamma - b.gamma);
  return da * da + db * db + dg * dg;
}

struct AxisFrame {
  Eigen::Matrix3d r;       // proper rotation, columns = principal axes
  Eigen::Vector3d values;  // principal values in column order
};

/// All sign/permutation choices of an eigenframe that reproduce the tensor.
std::vector<AxisFrame> equivalent_frames(const Eigen::Matrix3d& tensor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(tensor);
  const Eigen::Matrix3d v = es.eigenvectors();
  const Eigen::Vector3d w = es.eigenvalues();
  std::vector<AxisFrame> out;
  int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perm)
    for (int s0 : {1, -1})
      for (int s1 : {1, -1}) {
        AxisFrame f;
        f.r.col(0) = s0 * v.col(p[0]);
        f.r.col(1) = s1 * v.col(p[1]);
        f.r.col(2) = v.col(p[2]);
        if (f.r.determinant() < 0) f.r.col(2) = -f.r.col(2);
        f.values = {w(p[0]), w(p[1]), w(p[2])};
        out.push_back(f);
      }
  return out;
}

/// Nearest (angles, g1, g2, g3) parametrization of the Zeeman tensor `t`;
/// returns the squared parameter-space distance to `ref`.
double fit_zeeman_params(const Eigen::Matrix3d& t, const StateParams& ref,
                         StateParams& out) {
  double best = std::numeric_limits<double>::infinity();
  for (const AxisFrame& f : equivalent_frames(t))
    for (const EulerAngles& e : euler_branches(f.r)) {
      const double d = euler_distance_sq(e, ref.zeeman_angles) +
                       std::pow(f.values(0) - ref.g.g1, 2) +
                       std::pow(f.values(1) - ref.g.g2, 2) +
                       std::pow(f.values(2) - ref.g.g3, 2);
      if (d < best) {
        best = d;
        out.zeeman_angles = e;
        out.g = {f.values(0), f.values(1), f.values(2)};
      }
    }
  return best;
}

/// Nearest (angles, E, D) parametrization of the quadrupole tensor `t`
/// (diag(-E, E, D) form); squared parameter-space distance to `ref`.
double fit_quad_params(const Eigen::Matrix3d& t, const StateParams& ref,
                       StateParams& out) {
  const double scale = std::max(1e-12, t.cwiseAbs().maxCoeff());
  double best = std::numeric_limits<double>::infinity();
  for (const AxisFrame& f : equivalent_frames(t)) {
    if (std::abs(f.values(0) + f.values(1)) > 1e-9 * scale) continue;
    for (const EulerAngles& e : euler_branches(f.r)) {
      const double d = euler_distance_sq(e, ref.quad_angles) +
                       std::pow(f.values(1) - ref.q.e, 2) +
                       std::pow(f.values(2) - ref.q.d, 2);
      if (d < best) {
        best = d;
        out.quad_angles = e;
        out.q = {f.values(1), f.values(2)};
      }
    }
  }
  return best;
}

/// The discrete spectrum-preserving variants of one state's (M, Q) pair.
/// Generators (each leaves every |transition frequency| unchanged at every
/// field): time reversal (-M, Q); spectral negation (-M, -Q); and pi spin
/// rotations about an M principal axis k, which flip the signs of the other
/// two g-factors and conjugate Q by the same rotation. The generated group
/// has 16 elements: any sign pattern on (g1, g2, g3) paired with the matching
/// Q reorientation, times an independent sign of Q.
struct StateVariant {
  Eigen::Matrix3d zeeman;
  Eigen::Matrix3d quad;
  std::string name;
};

std::vector<StateVariant> exact_state_variants(const StateParams& s) {
  const Eigen::Matrix3d mt = s.zeeman_tensor().m;
  const Eigen::Matrix3d qt = s.quad_tensor().m;
  const Eigen::Matrix3d rm = rotation_matrix(s.zeeman_angles);
  std::vector<StateVariant> out;
  static const char* rot_names[4] = {"", "/rot-g1", "/rot-g2", "/rot-g3"};
  for (int r = 0; r < 4; ++r) {
    Eigen::Vector3d s_r = Eigen::Vector3d::Ones();
    Eigen::Matrix3d q_rot = qt;
    if (r > 0) {
      s_r = -s_r;
      s_r(r - 1) = 1.0;
      const Eigen::Matrix3d p = rm * s_r.asDiagonal() * rm.transpose();
      q_rot = p * qt * p.transpose();
    }
    // M S_r in the M principal frame flips the two g's orthogonal to axis r
    const Eigen::Matrix3d m_rot = mt * (rm * s_r.asDiagonal() * rm.transpose());
    for (double msign : {1.0, -1.0})
      for (double qsign : {1.0, -1.0})
        out.push_back({msign * m_rot, qsign * q_rot,
                       std::string(msign > 0 ? "m+" : "m-") +
                           (qsign > 0 ? "q+" : "q-") + rot_names[r]});
  }
  return out;
}

}  // namespace

StateParams nearest_equivalent_params(const StateParams& fitted,
                                      const StateParams& ref) {
  StateParams out = fitted;
  fit_zeeman_params(fitted.zeeman_tensor().m, ref, out);
  fit_quad_params(fitted.quad_tensor().m, ref, out);
  return out;
}

StateParams nearest_spectral_equivalent(const StateParams& fitted,
                                        const StateParams& ref) {
  StateParams best = fitted;
  double best_d = std::numeric_limits<double>::infinity();
  for (const StateVariant& v : exact_state_variants(fitted)) {
    StateParams cand = fitted;
    const double d =
        fit_zeeman_params(v.zeeman, ref, cand) + fit_quad_params(v.quad, ref, cand);
    if (d < best_d) {
      best_d = d;
      best = cand;
    }
  }
  return best;
}

namespace {

/// Replace a state's tensors by their C2 conjugates (subsite relabeling),
/// expressed back in Euler-angle form.
StateParams c2_conjugate_state(const StateParams& s, const C2Orientation& c2) {
  StateParams out = s;
  const Eigen::Matrix3d rc2 = c2.rotation();
  out.zeeman_angles = euler_from_rotation(rc2 * rotation_matrix(s.zeeman_angles));
  out.quad_angles = euler_from_rotation(rc2 * rotation_matrix(s.quad_angles));
  return out;
}

bool spectra_equal(const HamiltonianModel& a, const HamiltonianModel& b,
                   double tol_mhz) {
  const ModelEngine ea(a), eb(b);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uni(-80.0, 80.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d f{uni(rng), uni(rng), uni(rng)};
    PeakSet pa, pb;
    try {
      pa = ea.peaks_at(f, 4);
      pb = eb.peaks_at(f, 4);
    } catch (const DegenerateLevels&) {
      continue;
    }
    // compare as unlabeled merged peak lists
    std::vector<double> fa, fb;
    for (int band = 0; band < 3; ++band) {
      fa.insert(fa.end(), pa.bands[band].begin(), pa.bands[band].end());
      fb.insert(fb.end(), pb.bands[band].begin(), pb.bands[band].end());
    }
    std::sort(fa.begin(), fa.end());
    std::sort(fb.begin(), fb.end());
    if (fa.size() != fb.size()) return false;
    for (size_t i = 0; i < fa.size(); ++i)
      if (std::abs(fa[i] - fb[i]) > tol_mhz) return false;
  }
  return true;
}

}  // namespace

std::vector<std::pair<std::string, HamiltonianModel>> canonical_ambiguity_report(
    const HamiltonianModel& model) {
  std::vector<std::pair<std::string, HamiltonianModel>> candidates;
  candidates.emplace_back("identity", model);

  HamiltonianModel gswap = model;
  gswap.ground = c2_conjugate_state(model.ground, model.c2);
  candidates.emplace_back("ground-subsite-swap", gswap);

  HamiltonianModel eswap = model;
  eswap.excited = c2_conjugate_state(model.excited, model.c2);
  candidates.emplace_back("excited-subsite-swap", eswap);

  HamiltonianModel bswap = gswap;
  bswap.excited = eswap.excited;
  candidates.emplace_back("both-subsite-swap", bswap);

  // principal-axis relabeling of the quadrupole: gamma += 90 deg, E -> -E
  HamiltonianModel grelab = model;
  grelab.ground.quad_angles.gamma += deg2rad(90.0);
  grelab.ground.q.e = -grelab.ground.q.e;
  candidates.emplace_back("ground-quad-relabel", grelab);

  HamiltonianModel erelab = model;
  erelab.excited.quad_angles.gamma += deg2rad(90.0);
  erelab.excited.q.e = -erelab.excited.q.e;
  candidates.emplace_back("excited-quad-relabel", erelab);

  // tensor-changing exact variants of each state: time reversal, spectral
  // negation and pi reorientations, rebuilt in parameter form near the input
  for (const char* which : {"ground", "excited"}) {
    const bool is_ground = std::string(which) == "ground";
    const StateParams& s = is_ground ? model.ground : model.excited;
    for (const StateVariant& v : exact_state_variants(s)) {
      if (v.name == "m+q+") continue; // identity, already listed
      StateParams t = s;
      fit_zeeman_params(v.zeeman, s, t);
      fit_quad_params(v.quad, s, t);
      HamiltonianModel m2 = model;
      (is_ground ? m2.ground : m2.excited) = t;
      candidates.emplace_back(std::string(which) + "-" + v.name, m2);
    }
  }

  std::vector<std::pair<std::string, HamiltonianModel>> verified;
  for (auto& [name, m] : candidates)
    if (spectra_equal(model, m, 1e-6)) verified.emplace_back(name, m);
  return verified;
}

void save_fit_result_json(const FitResult& r, const FitConfig& cfg,
                          const std::string& path) {
  json j;
  j["model"] = json::parse(model_to_json_text(r.model));
  j["rms_khz_per_peak"] = r.rms_khz;
  j["cost_khz_per_peak"] = r.cost_khz;
  j["unmatched_peaks"] = r.unmatched;
  j["evaluations"] = r.evaluations;
  j["converged"] = r.converged;
  j["seed"] = r.seed;
  j["ambiguity_note"] = r.ambiguity_note;
  json errs = json::object();
  for (size_t i = 0; i < r.param_names.size(); ++i)
    errs[r.param_names[i]] =
        r.std_errors.size() > (int)i ? r.std_errors((int)i) : 0.0;
  j["std_errors"] = errs;
  j["config"] = {{"initial_temp", cfg.initial_temp},
                 {"cooling", cfg.cooling},
                 {"steps_per_temp", cfg.steps_per_temp},
                 {"min_temp_fraction", cfg.min_temp_fraction},
                 {"max_evals", cfg.max_evals},
                 {"angle_scale_deg", cfg.angle_scale_deg},
                 {"g_scale", cfg.g_scale},
                 {"ed_scale", cfg.ed_scale},
                 {"c2_scale_deg", cfg.c2_scale_deg},
                 {"unmatched_penalty_mhz", cfg.unmatched_penalty_mhz},
                 {"seed", cfg.seed},
                 {"restarts", cfg.restarts},
                 {"staged", cfg.staged},
                 {"polish", cfg.polish},
                 {"rms_ceiling_khz", cfg.rms_ceiling_khz}};
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write fit result: " + path);
  out << j.dump(2) << "\n";
}

void save_covariance_csv(const FitResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write covariance: " + path);
  out << "param";
  for (const auto& n : r.param_names) out << "," << n;
  out << "\n";
  char cell[64];
  for (size_t i = 0; i < r.param_names.size(); ++i) {
    out << r.param_names[i];
    for (size_t j = 0; j < r.param_names.size(); ++j) {
      std::snprintf(cell, sizeof cell, ",%.12e",
                    r.covariance.size() ? r.covariance((int)i, (int)j) : 0.0);
      out << cell;
    }
    out << "\n";
  }
}

}  // namespace pryso
