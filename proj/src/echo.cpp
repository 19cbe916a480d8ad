#include "pryso/echo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pryso/errors.hpp"
#include "pryso/simplex.hpp"

namespace pryso {

using nlohmann::json;

double model_eval(const EchoFit& fit, double two_tau_ms) {
  return fit.offset + fit.i0 * std::exp(-std::pow(two_tau_ms / fit.t2_ms, fit.n));
}

namespace {

void validate(const DecayTrace& trace) {
  if (trace.samples.size() < 5)
    throw InsufficientData("fit_decay: need at least 5 samples");
  double prev = 0.0;
  bool any_decrease = false;
  for (size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    if (!(s.two_tau_ms > prev))
      throw MalformedInput("fit_decay: two_tau must be positive and strictly increasing");
    prev = s.two_tau_ms;
    if (i > 0 && s.intensity < trace.samples[i - 1].intensity)
      any_decrease = true;
  }
  if (!any_decrease)
    throw DegenerateTrace("fit_decay: intensity envelope never decreases");
}

/// Log-linear starting point: regress log(-log u) on log(2tau).
EchoFit initial_guess(const DecayTrace& trace, bool fit_offset) {
  EchoFit g;
  double imin = std::numeric_limits<double>::infinity();
  double imax = -imin;
  for (const auto& s : trace.samples) {
    imin = std::min(imin, s.intensity);
    imax = std::max(imax, s.intensity);
  }
  g.offset = fit_offset ? imin : 0.0;
  g.i0 = std::max(imax - g.offset, 1e-30);

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int nn = 0;
  for (const auto& s : trace.samples) {
    const double u = (s.intensity - g.offset) / g.i0;
    if (u < 1e-6 || u > 0.999) continue;
    const double x = std::log(s.two_tau_ms);
    const double y = std::log(-std::log(u));
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++nn;
  }
  if (nn >= 2 && sxx * nn - sx * sx > 1e-12) {
    const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    const double icept = (sy - slope * sx) / nn;
    g.n = std::clamp(slope, 1.0, 2.0);
    if (std::abs(slope) > 1e-9) g.t2_ms = std::exp(-icept / slope);
  }
  if (!(g.t2_ms > 0) || !std::isfinite(g.t2_ms))
    g.t2_ms = trace.samples[trace.samples.size() / 2].two_tau_ms;
  return g;
}

}  // namespace

EchoFit fit_decay(const DecayTrace& trace, const std::optional<EchoFit>& init,
                  bool fit_offset) {
  validate(trace);
  EchoFit start = init.value_or(initial_guess(trace, fit_offset));
  if (!fit_offset) start.offset = 0.0;

  const int np = fit_offset ? 4 : 3;
  const auto weight = [&](const DecaySample& s) {
    return s.sigma && *s.sigma > 0 ? 1.0 / (*s.sigma * *s.sigma) : 1.0;
  };

  const auto ssr_of = [&](const EchoFit& f) {
    double ssr = 0.0;
    for (const auto& s : trace.samples) {
      const double r = s.intensity - model_eval(f, s.two_tau_ms);
      ssr += weight(s) * r * r;
    }
    return ssr;
  };

  const auto unpack = [&](const Eigen::VectorXd& x) {
    EchoFit f = start;
    f.i0 = x(0);
    f.t2_ms = x(1);
    f.n = std::clamp(x(2), 1.0, 2.0);
    if (fit_offset) f.offset = x(3);
    return f;
  };
  const auto objective = [&](const Eigen::VectorXd& x) {
    if (!(x(0) > 0) || !(x(1) > 0))
      return std::numeric_limits<double>::infinity();
    const double excess = x(2) < 1.0 ? 1.0 - x(2) : (x(2) > 2.0 ? x(2) - 2.0 : 0.0);
    return ssr_of(unpack(x)) * (1.0 + 100.0 * excess * excess);
  };

  Eigen::VectorXd x0(np), step(np);
  x0(0) = start.i0;
  x0(1) = start.t2_ms;
  x0(2) = start.n;
  step(0) = 0.1 * start.i0;
  step(1) = 0.1 * start.t2_ms;
  step(2) = 0.1;
  if (fit_offset) {
    x0(3) = start.offset;
    step(3) = 0.05 * start.i0;
  }

  SimplexOptions opt;
  opt.xtol = 1e-11;
  SimplexResult sr = nelder_mead(objective, x0, step, opt);
  // a second round from the optimum guards against premature shrink
  sr = nelder_mead(objective, sr.x, 0.01 * step, opt);

  EchoFit fit = unpack(sr.x);
  const double ssr = ssr_of(fit);
  fit.residual_norm = std::sqrt(ssr);

  // Gauss-Newton standard errors at the optimum
  const int nd = (int)trace.samples.size();
  Eigen::MatrixXd jac(nd, np);
  Eigen::VectorXd base(np);
  base(0) = fit.i0;
  base(1) = fit.t2_ms;
  base(2) = fit.n;
  if (np == 4) base(3) = fit.offset;
  const auto eval_params = [&](const Eigen::VectorXd& p, double tt) {
    EchoFit f = fit;
    f.i0 = p(0);
    f.t2_ms = p(1);
    f.n = p(2);
    if (np == 4) f.offset = p(3);
    return model_eval(f, tt);
  };
  for (int p = 0; p < np; ++p) {
    const double h = std::max(1e-7, 1e-6 * std::abs(base(p)));
    Eigen::VectorXd bp = base, bm = base;
    bp(p) += h;
    bm(p) -= h;
    for (int i = 0; i < nd; ++i) {
      const double w = std::sqrt(weight(trace.samples[i]));
      jac(i, p) = w *
                  (eval_params(bp, trace.samples[i].two_tau_ms) -
                   eval_params(bm, trace.samples[i].two_tau_ms)) /
                  (2 * h);
    }
  }
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const double dof = std::max(1, nd - np);
  const double sigma2 = ssr / dof;
  const Eigen::MatrixXd cov = sigma2 * jtj.inverse();
  fit.std_errors.setZero();
  for (int p = 0; p < np; ++p)
    fit.std_errors(p < 3 ? p : 3) = std::sqrt(std::max(0.0, cov(p, p)));
  return fit;
}

DecayTrace load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open trace file: " + path);
  DecayTrace trace;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) throw MalformedInput("trace row needs >= 2 columns");
    DecaySample s;
    try {
      s.two_tau_ms = std::stod(cells[0]);
      s.intensity = std::stod(cells[1]);
      if (cells.size() >= 3 && !cells[2].empty()) s.sigma = std::stod(cells[2]);
    } catch (const std::invalid_argument&) {
      if (lineno == 1) continue; // header
      throw MalformedInput("trace row " + std::to_string(lineno) +
                           ": bad numeric field");
    }
    trace.samples.push_back(s);
  }
  return trace;
}

void save_echo_fit_json(const EchoFit& fit, const std::string& path) {
  json j = {{"i0", fit.i0},
            {"t2_ms", fit.t2_ms},
            {"n", fit.n},
            {"offset", fit.offset},
            {"std_errors",
             {{"i0", fit.std_errors(0)},
              {"t2_ms", fit.std_errors(1)},
              {"n", fit.std_errors(2)},
              {"offset", fit.std_errors(3)}}},
            {"residual_norm", fit.residual_norm}};
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write echo fit: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pryso
