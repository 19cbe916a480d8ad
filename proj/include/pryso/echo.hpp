#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace pryso {

struct DecaySample {
  double two_tau_ms = 0.0;
  double intensity = 0.0;
  std::optional<double> sigma; // per-point uncertainty, optional
};

struct DecayTrace {
  std::vector<DecaySample> samples;
};

/// Stretched-exponential echo decay: offset + i0 * exp(-(2tau/t2)^n).
struct EchoFit {
  double i0 = 1.0;
  double t2_ms = 1.0;
  double n = 1.0; // clamped to [1, 2]
  double offset = 0.0;
  Eigen::Vector4d std_errors = Eigen::Vector4d::Zero(); // (i0, t2, n, offset)
  double residual_norm = 0.0;
};

double model_eval(const EchoFit& fit, double two_tau_ms);

/// Weighted least squares via simplex descent from a log-linear initial
/// guess. Throws InsufficientData (<5 points), DegenerateTrace
/// (non-decreasing envelope), MalformedInput (bad abscissae).
EchoFit fit_decay(const DecayTrace& trace,
                  const std::optional<EchoFit>& init = std::nullopt,
                  bool fit_offset = true);

/// CSV: two_tau_ms,intensity[,sigma]; a header line is tolerated.
DecayTrace load_trace_csv(const std::string& path);
void save_echo_fit_json(const EchoFit& fit, const std::string& path);

}  // namespace pryso
