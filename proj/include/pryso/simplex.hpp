#pragma once

#include <Eigen/Dense>
#include <functional>

namespace pryso {

struct SimplexOptions {
  int max_iter = 50000;
  double xtol = 1e-10; // simplex extent, in the scaled coordinates
  double ftol = 1e-14;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double fval = 0.0;
  int evals = 0;
};

/// Derivative-free Nelder-Mead descent. `step` sets the initial simplex
/// extent per coordinate (and implicitly the parameter scaling).
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                          const SimplexOptions& opt = {});

}  // namespace pryso
