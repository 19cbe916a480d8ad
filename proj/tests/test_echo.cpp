#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "pryso/echo.hpp"
#include "pryso/errors.hpp"

using namespace pryso;

namespace {

DecayTrace make_trace(double i0, double t2, double n, double offset,
                      double noise_frac, std::uint64_t seed, int points = 40) {
  EchoFit p;
  p.i0 = i0;
  p.t2_ms = t2;
  p.n = n;
  p.offset = offset;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_frac * i0);
  DecayTrace trace;
  for (int k = 0; k < points; ++k) {
    DecaySample s;
    s.two_tau_ms = 0.2 + 0.2 * k;
    s.intensity = model_eval(p, s.two_tau_ms);
    if (noise_frac > 0) s.intensity += gauss(rng);
    trace.samples.push_back(s);
  }
  return trace;
}

}  // namespace

TEST_CASE("stretched-exponential evaluation (frozen oracle)") {
  EchoFit p;
  p.i0 = 100.0;
  p.t2_ms = 10.0;
  p.n = 1.5;
  p.offset = 2.0;
  CHECK(model_eval(p, 5.0) == doctest::Approx(72.218850133).epsilon(1e-9));
  CHECK(model_eval(p, 0.0) == doctest::Approx(102.0));
  // n = 1 reduces to a plain exponential
  p.n = 1.0;
  CHECK(model_eval(p, 10.0) == doctest::Approx(2.0 + 100.0 / M_E).epsilon(1e-12));
}

TEST_CASE("noiseless round-trip recovers all four parameters to < 0.1%") {
  const DecayTrace trace = make_trace(0.95, 2.6, 1.73, 0.04, 0.0, 0);
  const EchoFit fit = fit_decay(trace);
  CHECK(fit.i0 == doctest::Approx(0.95).epsilon(1e-3));
  CHECK(fit.t2_ms == doctest::Approx(2.6).epsilon(1e-3));
  CHECK(fit.n == doctest::Approx(1.73).epsilon(1e-3));
  CHECK(std::abs(fit.offset - 0.04) < 1e-3 * 0.95);
  CHECK(fit.residual_norm < 1e-5);
}

TEST_CASE("3% noise: T2 = 2.6 ms recovered within 0.1 ms") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const DecayTrace trace = make_trace(1.0, 2.6, 1.73, 0.05, 0.03, seed);
    const EchoFit fit = fit_decay(trace);
    CHECK(std::abs(fit.t2_ms - 2.6) < 0.1);
    CHECK(fit.std_errors(1) > 0.0);
    CHECK(fit.std_errors(1) < 0.2);
    CHECK(fit.n >= 1.0);
    CHECK(fit.n <= 2.0);
  }
}

TEST_CASE("offset can be frozen at zero") {
  const DecayTrace trace = make_trace(1.0, 3.0, 1.4, 0.0, 0.0, 0);
  const EchoFit fit = fit_decay(trace, std::nullopt, /*fit_offset=*/false);
  CHECK(fit.offset == 0.0);
  CHECK(fit.t2_ms == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(fit.std_errors(3) == 0.0);
}

TEST_CASE("per-point uncertainties weight the fit") {
  DecayTrace trace = make_trace(1.0, 2.6, 1.5, 0.05, 0.0, 0);
  // corrupt one point but mark it as nearly worthless
  trace.samples[10].intensity += 0.5;
  trace.samples[10].sigma = 100.0;
  for (auto& s : trace.samples)
    if (!s.sigma) s.sigma = 0.01;
  const EchoFit fit = fit_decay(trace);
  CHECK(fit.t2_ms == doctest::Approx(2.6).epsilon(1e-3));
}

TEST_CASE("validation errors") {
  DecayTrace tiny;
  for (int k = 0; k < 4; ++k) tiny.samples.push_back({1.0 + k, 1.0 / (1 + k)});
  CHECK_THROWS_AS(fit_decay(tiny), InsufficientData);

  DecayTrace unordered = make_trace(1.0, 2.0, 1.2, 0.0, 0.0, 0, 10);
  std::swap(unordered.samples[3], unordered.samples[4]);
  CHECK_THROWS_AS(fit_decay(unordered), MalformedInput);

  DecayTrace rising;
  for (int k = 0; k < 10; ++k) rising.samples.push_back({1.0 + k, 1.0 + 0.1 * k});
  CHECK_THROWS_AS(fit_decay(rising), DegenerateTrace);
}

TEST_CASE("trace CSV loader tolerates a header and rejects junk") {
  const auto tmp = std::filesystem::temp_directory_path();
  const std::string path = (tmp / "pryso_trace.csv").string();
  {
    std::ofstream out(path);
    out << "two_tau_ms,intensity,sigma\n1.0,0.9\n2.0,0.7,0.01\n3.0,0.5\n";
  }
  const DecayTrace trace = load_trace_csv(path);
  REQUIRE(trace.samples.size() == 3);
  CHECK(trace.samples[0].two_tau_ms == 1.0);
  CHECK(!trace.samples[0].sigma.has_value());
  CHECK(trace.samples[1].sigma.value() == 0.01);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_trace_csv(path), MalformedInput);
  {
    std::ofstream out(path);
    out << "1.0,0.9\nbad,row\n";
  }
  CHECK_THROWS_AS(load_trace_csv(path), MalformedInput);
  std::remove(path.c_str());
}
