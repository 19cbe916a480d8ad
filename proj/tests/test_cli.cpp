#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "pryso/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = PRYSO_CLI_PATH;
const std::string kModel = std::string(PRYSO_DATA_DIR) + "/site2_table1.json";

int run(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++n;
  return n;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "pryso_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("simulate: defaults, determinism, single point") {
  TempDir tmp;
  const std::string out = tmp.file("ds.csv");
  CHECK(run("simulate --model \"" + kModel + "\" --out " + out) == 0);
  CHECK(line_count(out) == 201 * 32 + 1); // header + 32 peaks per point
  CHECK(fs::exists(out + ".meta.json"));
  CHECK(fs::exists(out + ".manifest.json"));
  const json manifest = json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest["subcommand"] == "simulate");
  CHECK(manifest["config"]["b0_gauss"] == 80.0);

  // byte-identical reruns with the same seed, even with noise
  const std::string a = tmp.file("a.csv"), b = tmp.file("b.csv");
  CHECK(run("simulate --model \"" + kModel + "\" --noise 9 --seed 7 --out " + a) == 0);
  CHECK(run("simulate --model \"" + kModel + "\" --noise 9 --seed 7 --out " + b) == 0);
  CHECK(slurp(a) == slurp(b));

  // a single point sits at the spiral start (0, 0, -b0)
  const std::string one = tmp.file("one.csv");
  CHECK(run("simulate --model \"" + kModel + "\" --n-points 1 --out " + one) == 0);
  std::ifstream in(one);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(row.find(",0.000000,0.000000,-80.000000,") != std::string::npos);
}

TEST_CASE("simulate: exit codes for bad input and bad output") {
  TempDir tmp;
  const std::string bad_model = tmp.file("bad.json");
  std::ofstream(bad_model) << "{ not json";
  CHECK(run("simulate --model " + bad_model + " --out " + tmp.file("x.csv")) == 2);
  CHECK(run("simulate --model /nonexistent.json --out " + tmp.file("x.csv")) == 2);
  CHECK(run("simulate --model \"" + kModel + "\" --out /nonexistent_dir/x.csv") == 3);
}

TEST_CASE("tensors: CSV output matches the library basis change") {
  TempDir tmp;
  const std::string out = tmp.file("tensors.csv");
  CHECK(run("tensors --model \"" + kModel + "\" --basis D1D2b --out " + out) == 0);
  CHECK(line_count(out) == 24 + 1); // 2 states x 2 subsites x 2 tensors x 3 rows

  const pryso::HamiltonianModel m = pryso::load_model(kModel);
  const Eigen::Matrix3d qg = pryso::to_d1d2b(m.ground.quad_tensor().m, m);
  std::ifstream in(out);
  std::string line;
  std::getline(in, line); // header
  bool checked = false;
  while (std::getline(in, line)) {
    if (line.rfind("ground,1,Q,0,", 0) == 0) {
      double c1, c2, c3;
      REQUIRE(std::sscanf(line.c_str(), "ground,1,Q,0,%lf,%lf,%lf", &c1, &c2, &c3) == 3);
      CHECK(c1 == doctest::Approx(qg(0, 0)).epsilon(1e-5));
      CHECK(c2 == doctest::Approx(qg(0, 1)).epsilon(1e-5));
      CHECK(c3 == doctest::Approx(qg(0, 2)).epsilon(1e-5));
      checked = true;
    }
  }
  CHECK(checked);

  CHECK(run("tensors --model \"" + kModel + "\" --basis bogus") != 0);
  CHECK(run("tensors --model /nonexistent.json") == 2);
}

TEST_CASE("fit: strict convergence gating and artifacts") {
  TempDir tmp;
  const std::string ds = tmp.file("ds.csv");
  REQUIRE(run("simulate --model \"" + kModel + "\" --n-points 5 --out " + ds) == 0);

  const std::string cfg = tmp.file("fast.json");
  std::ofstream(cfg) << R"({"steps_per_temp": 5, "min_temp_fraction": 0.5,
                            "polish": false, "staged": false})";

  // starting from the generating model, the fit stays at rms ~ 0
  const std::string out = tmp.file("fit");
  CHECK(run("fit --data " + ds + " --init-model \"" + kModel + "\" --config " +
            cfg + " --out " + out + " --strict") == 0);
  CHECK(fs::exists(out + ".json"));
  CHECK(fs::exists(out + "_covariance.csv"));
  CHECK(fs::exists(out + "_model.json"));
  CHECK(fs::exists(out + ".manifest.json"));
  const json result = json::parse(slurp(out + ".json"));
  CHECK(result["converged"] == true);
  CHECK(result["rms_khz_per_peak"].get<double>() < 1e-6);
  CHECK(result["unmatched_peaks"] == 0);

  // an unreachable rms ceiling trips strict mode (exit 4), non-strict exits 0
  const std::string cfg2 = tmp.file("strict.json");
  std::ofstream(cfg2) << R"({"steps_per_temp": 5, "min_temp_fraction": 0.5,
                             "polish": false, "staged": false,
                             "rms_ceiling_khz": -1.0})";
  CHECK(run("fit --data " + ds + " --init-model \"" + kModel + "\" --config " +
            cfg2 + " --out " + tmp.file("f2") + " --strict") == 4);
  CHECK(run("fit --data " + ds + " --init-model \"" + kModel + "\" --config " +
            cfg2 + " --out " + tmp.file("f3")) == 0);

  // empty dataset: exit 2
  const std::string empty = tmp.file("empty.csv");
  std::ofstream(empty) << "index,t,bx,by,bz,band,freq_mhz\n";
  CHECK(run("fit --data " + empty + " --init-model \"" + kModel + "\" --config " +
            cfg + " --out " + tmp.file("f4")) == 2);
}

TEST_CASE("zefoz: empty grid and output plumbing") {
  TempDir tmp;
  const std::string out = tmp.file("zf");
  CHECK(run("zefoz --model \"" + kModel + "\" --extent 0 --out " + out) == 0);
  CHECK(line_count(out + ".csv") == 1); // header only
  const json j = json::parse(slurp(out + ".json"));
  CHECK(j["candidates"].empty());
  CHECK(j["grid"]["delta_b_gauss"] == 0.08);
  const json manifest = json::parse(slurp(out + ".manifest.json"));
  CHECK(manifest["subcommand"] == "zefoz");

  CHECK(run("zefoz --model /nonexistent.json --out " + tmp.file("x")) == 2);
}

TEST_CASE("echo-fit: end-to-end trace fitting") {
  TempDir tmp;
  const std::string trace = tmp.file("trace.csv");
  {
    std::ofstream out(trace);
    out << "two_tau_ms,intensity\n";
    for (int k = 0; k < 30; ++k) {
      const double t = 0.2 + 0.3 * k;
      out << t << "," << 0.02 + 0.9 * std::exp(-std::pow(t / 2.6, 1.73)) << "\n";
    }
  }
  const std::string out = tmp.file("echo.json");
  CHECK(run("echo-fit --trace " + trace + " --out " + out) == 0);
  const json fit = json::parse(slurp(out));
  CHECK(fit["t2_ms"].get<double>() == doctest::Approx(2.6).epsilon(1e-3));
  CHECK(fit["n"].get<double>() == doctest::Approx(1.73).epsilon(1e-2));
  CHECK(fs::exists(out + ".manifest.json"));

  CHECK(run("echo-fit --trace /nonexistent.csv --out " + tmp.file("x.json")) == 2);

  // a rising trace is rejected as input error
  const std::string rising = tmp.file("rising.csv");
  {
    std::ofstream o(rising);
    o << "two_tau_ms,intensity\n";
    for (int k = 0; k < 10; ++k) o << (1.0 + k) << "," << (1.0 + 0.1 * k) << "\n";
  }
  CHECK(run("echo-fit --trace " + rising + " --out " + tmp.file("y.json")) == 2);
}

TEST_CASE("unknown subcommand and missing required options fail cleanly") {
  CHECK(run("frobnicate") != 0);
  CHECK(run("simulate") != 0); // --model is required
}
