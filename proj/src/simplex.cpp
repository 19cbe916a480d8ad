#include "pryso/simplex.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace pryso {

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                          const SimplexOptions& opt) {
  const int n = (int)x0.size();
  int evals = 0;
  const auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  std::vector<Eigen::VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) xs[i + 1](i) += step(i);
  for (int i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

  // adaptive coefficients (Gao & Han)
  const double alpha = 1.0;
  const double beta = 1.0 + 2.0 / n;
  const double gamma = 0.75 - 0.5 / n;
  const double delta = 1.0 - 1.0 / n;

  std::vector<int> order(n + 1);
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fs[a] < fs[b]; });
    const int lo = order[0], hi = order[n], second_hi = order[n - 1];

    // convergence: simplex extent in step-scaled coordinates
    double extent = 0.0;
    for (int i = 1; i <= n; ++i)
      for (int k = 0; k < n; ++k)
        extent = std::max(extent,
                          std::abs(xs[order[i]](k) - xs[lo](k)) /
                              std::max(std::abs(step(k)), 1e-300));
    if (extent < opt.xtol || std::abs(fs[hi] - fs[lo]) < opt.ftol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != hi) centroid += xs[i];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + alpha * (centroid - xs[hi]);
    const double fr = eval(xr);
    if (fr < fs[lo]) {
      const Eigen::VectorXd xe = centroid + beta * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[hi] = xe; fs[hi] = fe;
      } else {
        xs[hi] = xr; fs[hi] = fr;
      }
    } else if (fr < fs[second_hi]) {
      xs[hi] = xr; fs[hi] = fr;
    } else {
      const bool outside = fr < fs[hi];
      Eigen::VectorXd xc;
      if (outside)
        xc = centroid + gamma * (xr - centroid);
      else
        xc = centroid - gamma * (centroid - xs[hi]);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[hi])) {
        xs[hi] = xc; fs[hi] = fc;
      } else {
        // shrink toward the best vertex
        for (int i = 0; i <= n; ++i) {
          if (i == lo) continue;
          xs[i] = xs[lo] + delta * (xs[i] - xs[lo]);
          fs[i] = eval(xs[i]);
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fs[i] < fs[best]) best = i;
  return {xs[best], fs[best], evals};
}

}  // namespace pryso
