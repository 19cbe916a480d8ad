#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pryso/echo.hpp"
#include "pryso/errors.hpp"
#include "pryso/fit.hpp"
#include "pryso/manifest.hpp"
#include "pryso/spectra.hpp"
#include "pryso/zefoz.hpp"

namespace {

using namespace pryso;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitIo = 3;
constexpr int kExitNoConvergence = 4;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_ = clock::now();
};

int cmd_simulate(const std::string& model_path, double b0, int n_points,
                 int turns, double noise_khz, std::uint64_t seed,
                 const std::string& out_path) {
  Timer timer;
  const HamiltonianModel model = load_model(model_path);
  SpiralScan scan;
  scan.b0 = b0;
  scan.n_points = n_points;
  scan.turns = turns;
  const FieldScanDataset ds = synthesize_dataset(model, scan, noise_khz, seed);
  save_dataset_csv(ds, out_path);

  RunManifest m;
  m.subcommand = "simulate";
  m.config = {{"model", model_path}, {"b0_gauss", b0},   {"n_points", n_points},
              {"turns", turns},      {"noise_khz", noise_khz}, {"seed", seed}};
  m.inputs = {model_path};
  m.outputs = {out_path, out_path + ".meta.json"};
  m.seed = seed;
  m.duration_s = timer.seconds();
  write_manifest(m, out_path + ".manifest.json");

  long rows = 0;
  for (const auto& pt : ds.points)
    for (const auto& band : pt.bands) rows += (long)band.size();
  std::printf("wrote %ld peak rows over %d field points to %s\n", rows,
              (int)ds.points.size(), out_path.c_str());
  return kExitOk;
}

int cmd_fit(const std::string& data_path, const std::string& init_path,
            const std::string& config_path, const std::string& out_prefix,
            FitConfig cfg, bool strict) {
  Timer timer;
  const FieldScanDataset data = load_dataset_csv(data_path);
  const HamiltonianModel init = load_model(init_path);

  const FitResult result = anneal(data, cfg, init);

  const std::string result_path = out_prefix + ".json";
  const std::string cov_path = out_prefix + "_covariance.csv";
  const std::string model_path = out_prefix + "_model.json";
  save_fit_result_json(result, cfg, result_path);
  save_covariance_csv(result, cov_path);
  save_model(result.model, model_path);

  RunManifest m;
  m.subcommand = "fit";
  m.config = {{"data", data_path},
              {"init_model", init_path},
              {"config_file", config_path},
              {"seed", cfg.seed},
              {"restarts", cfg.restarts},
              {"staged", cfg.staged},
              {"polish", cfg.polish},
              {"cooling", cfg.cooling},
              {"steps_per_temp", cfg.steps_per_temp},
              {"unmatched_penalty_mhz", cfg.unmatched_penalty_mhz},
              {"rms_ceiling_khz", cfg.rms_ceiling_khz},
              {"strict", strict}};
  m.inputs = {data_path, init_path};
  m.outputs = {result_path, cov_path, model_path};
  m.seed = cfg.seed;
  m.duration_s = timer.seconds();
  write_manifest(m, out_prefix + ".manifest.json");

  std::printf("rms per peak: %.4f kHz (%d unmatched, %ld evaluations)\n",
              result.rms_khz, result.unmatched, result.evaluations);
  if (!result.converged) {
    std::fprintf(stderr, "warning: rms above ceiling (%.1f kHz)\n",
                 cfg.rms_ceiling_khz);
    if (strict) return kExitNoConvergence;
  }
  return kExitOk;
}

int cmd_zefoz(const std::string& model_path, const GridSpec& spec,
              const std::string& out_prefix) {
  Timer timer;
  const HamiltonianModel model = load_model(model_path);
  const std::vector<ZefozCandidate> cands = grid_search(model, spec);

  const std::string csv_path = out_prefix + ".csv";
  const std::string json_path = out_prefix + ".json";
  const std::string scatter_path = out_prefix + "_scatter.csv";
  save_candidates_csv(cands, csv_path);
  save_candidates_json(cands, spec, json_path);
  save_scatter_csv(cands, scatter_path);

  RunManifest m;
  m.subcommand = "zefoz";
  m.config = {{"model", model_path},
              {"extent_gauss", spec.extent},
              {"step_gauss", spec.step},
              {"gradient_threshold_hz_per_g", spec.gradient_threshold},
              {"delta_b_gauss", spec.delta_b},
              {"report_resolution_gauss", spec.report_resolution},
              {"state", spec.state == State::Ground ? "ground" : "excited"},
              {"threads", spec.threads}};
  m.inputs = {model_path};
  m.outputs = {csv_path, json_path, scatter_path};
  m.duration_s = timer.seconds();
  write_manifest(m, out_prefix + ".manifest.json");

  std::printf("%zu ZEFOZ candidates\n", cands.size());
  if (!cands.empty()) {
    const auto& c = cands.front();
    std::printf("best: B=(%.2f, %.2f, %.2f) G, f=%.4f MHz, |S1|=%.3f Hz/G, "
                "S2=%.2f Hz/G^2, T2=%.3f s\n",
                c.field.x(), c.field.y(), c.field.z(), c.f_mhz, c.s1_norm,
                c.s2_scalar, c.t2_s);
  }
  return kExitOk;
}

int cmd_echo_fit(const std::string& trace_path, const std::string& out_path,
                 bool fit_offset) {
  Timer timer;
  const DecayTrace trace = load_trace_csv(trace_path);
  const EchoFit fit = fit_decay(trace, std::nullopt, fit_offset);
  save_echo_fit_json(fit, out_path);

  RunManifest m;
  m.subcommand = "echo-fit";
  m.config = {{"trace", trace_path}, {"fit_offset", fit_offset}};
  m.inputs = {trace_path};
  m.outputs = {out_path};
  m.duration_s = timer.seconds();
  write_manifest(m, out_path + ".manifest.json");

  std::printf("T2 = %.4f +- %.4f ms, n = %.4f, I0 = %.4f, offset = %.4f\n",
              fit.t2_ms, fit.std_errors(1), fit.n, fit.i0, fit.offset);
  return kExitOk;
}

int cmd_tensors(const std::string& model_path, const std::string& basis,
                const std::string& out_path) {
  const HamiltonianModel model = load_model(model_path);
  const bool d1d2b = basis == "D1D2b";

  std::string text = "state,subsite,tensor,row,c1,c2,c3\n";
  char line[200];
  for (State st : {State::Ground, State::Excited}) {
    const StateParams& sp = state_params(model, st);
    for (int subsite = 1; subsite <= 2; ++subsite) {
      InteractionTensor mt = sp.zeeman_tensor();
      InteractionTensor qt = sp.quad_tensor();
      if (subsite == 2) {
        mt = c2_transform(mt, model.c2);
        qt = c2_transform(qt, model.c2);
      }
      Eigen::Matrix3d mm = mt.m, qm = qt.m;
      if (d1d2b) {
        mm = to_d1d2b(mm, model);
        qm = to_d1d2b(qm, model);
      }
      const char* state_name = st == State::Ground ? "ground" : "excited";
      for (int r = 0; r < 3; ++r) {
        std::snprintf(line, sizeof line, "%s,%d,M,%d,%.6f,%.6f,%.6f\n",
                      state_name, subsite, r, mm(r, 0), mm(r, 1), mm(r, 2));
        text += line;
      }
      for (int r = 0; r < 3; ++r) {
        std::snprintf(line, sizeof line, "%s,%d,Q,%d,%.6f,%.6f,%.6f\n",
                      state_name, subsite, r, qm(r, 0), qm(r, 1), qm(r, 2));
        text += line;
      }
    }
  }
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    Timer timer;
    std::ofstream out(out_path);
    if (!out) throw std::ios_base::failure("cannot write tensors: " + out_path);
    out << text;
    RunManifest m;
    m.subcommand = "tensors";
    m.config = {{"model", model_path}, {"basis", basis}};
    m.inputs = {model_path};
    m.outputs = {out_path};
    m.duration_s = timer.seconds();
    write_manifest(m, out_path + ".manifest.json");
  }
  return kExitOk;
}

void apply_fit_config_file(const std::string& path, FitConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("config parse error: ") + e.what());
  }
  cfg.initial_temp = j.value("initial_temp", cfg.initial_temp);
  cfg.cooling = j.value("cooling", cfg.cooling);
  cfg.steps_per_temp = j.value("steps_per_temp", cfg.steps_per_temp);
  cfg.min_temp_fraction = j.value("min_temp_fraction", cfg.min_temp_fraction);
  cfg.max_evals = j.value("max_evals", cfg.max_evals);
  cfg.angle_scale_deg = j.value("angle_scale_deg", cfg.angle_scale_deg);
  cfg.g_scale = j.value("g_scale", cfg.g_scale);
  cfg.ed_scale = j.value("ed_scale", cfg.ed_scale);
  cfg.c2_scale_deg = j.value("c2_scale_deg", cfg.c2_scale_deg);
  cfg.unmatched_penalty_mhz =
      j.value("unmatched_penalty_mhz", cfg.unmatched_penalty_mhz);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.restarts = j.value("restarts", cfg.restarts);
  cfg.staged = j.value("staged", cfg.staged);
  cfg.polish = j.value("polish", cfg.polish);
  cfg.rms_ceiling_khz = j.value("rms_ceiling_khz", cfg.rms_ceiling_khz);
  cfg.threads = j.value("threads", cfg.threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperfine Hamiltonian toolkit for Pr3+:Y2SiO5 site 2"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "synthesize a spiral field-scan dataset");
  std::string sim_model, sim_out = "dataset.csv";
  double sim_b0 = 80.0, sim_noise = 0.0;
  int sim_n = 201, sim_turns = 3;
  std::uint64_t sim_seed = 1;
  sim->add_option("--model", sim_model, "model JSON file")->required();
  sim->add_option("--b0", sim_b0, "scan radius, Gauss");
  sim->add_option("--n-points", sim_n, "scan points");
  sim->add_option("--turns", sim_turns, "spiral turns");
  sim->add_option("--noise", sim_noise, "peak frequency noise sigma, kHz");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out", sim_out, "output CSV path");

  // fit
  auto* fit = app.add_subcommand("fit", "recover model parameters by simulated annealing");
  std::string fit_data, fit_init, fit_config, fit_out = "fit";
  FitConfig fit_cfg;
  bool fit_strict = false;
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_option("--init-model", fit_init, "initial model JSON")->required();
  fit->add_option("--config", fit_config, "fit config JSON");
  fit->add_option("--out", fit_out, "output prefix");
  auto* o_seed = fit->add_option("--seed", fit_cfg.seed, "RNG seed");
  auto* o_restarts = fit->add_option("--restarts", fit_cfg.restarts, "annealing restarts");
  auto* o_threads = fit->add_option("--threads", fit_cfg.threads, "worker threads");
  auto* o_cool = fit->add_option("--cooling", fit_cfg.cooling, "geometric cooling factor");
  auto* o_steps = fit->add_option("--steps-per-temp", fit_cfg.steps_per_temp, "proposals per temperature");
  auto* o_joint = fit->add_flag("--joint", "fit all parameters jointly (no staging)");
  auto* o_nopolish = fit->add_flag("--no-polish", "skip the simplex polish");
  fit->add_flag("--strict", fit_strict, "exit 4 when rms exceeds the ceiling");

  // zefoz
  auto* zf = app.add_subcommand("zefoz", "search ZEFOZ fields and project T2");
  std::string zf_model, zf_out = "zefoz", zf_state = "ground";
  GridSpec zf_spec;
  zf->add_option("--model", zf_model, "model JSON file")->required();
  zf->add_option("--extent", zf_spec.extent, "half-width of the search box, G");
  zf->add_option("--step", zf_spec.step, "grid step, G");
  zf->add_option("--threshold", zf_spec.gradient_threshold, "|S1| convergence target, Hz/G");
  zf->add_option("--delta-b", zf_spec.delta_b, "field fluctuation, G");
  zf->add_option("--resolution", zf_spec.report_resolution, "field-setting resolution, G");
  zf->add_option("--state", zf_state, "ground|excited");
  zf->add_option("--threads", zf_spec.threads, "worker threads");
  zf->add_option("--out", zf_out, "output prefix");

  // echo-fit
  auto* ec = app.add_subcommand("echo-fit", "fit a spin-echo decay trace");
  std::string ec_trace, ec_out = "echo_fit.json";
  bool ec_no_offset = false;
  ec->add_option("--trace", ec_trace, "trace CSV (two_tau_ms,intensity[,sigma])")->required();
  ec->add_option("--out", ec_out, "output JSON path");
  ec->add_flag("--no-offset", ec_no_offset, "freeze the offset at 0");

  // tensors
  auto* tn = app.add_subcommand("tensors", "print M and Q tensors per state and subsite");
  std::string tn_model, tn_basis = "lab", tn_out;
  tn->add_option("--model", tn_model, "model JSON file")->required();
  tn->add_option("--basis", tn_basis, "lab|D1D2b")->check(CLI::IsMember({"lab", "D1D2b"}));
  tn->add_option("--out", tn_out, "output CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(sim_model, sim_b0, sim_n, sim_turns, sim_noise,
                          sim_seed, sim_out);
    if (fit->parsed()) {
      FitConfig cfg;
      if (!fit_config.empty()) apply_fit_config_file(fit_config, cfg);
      // flags override the config file
      if (o_seed->count()) cfg.seed = fit_cfg.seed;
      if (o_restarts->count()) cfg.restarts = fit_cfg.restarts;
      if (o_threads->count()) cfg.threads = fit_cfg.threads;
      if (o_cool->count()) cfg.cooling = fit_cfg.cooling;
      if (o_steps->count()) cfg.steps_per_temp = fit_cfg.steps_per_temp;
      if (o_joint->count()) cfg.staged = false;
      if (o_nopolish->count()) cfg.polish = false;
      return cmd_fit(fit_data, fit_init, fit_config, fit_out, cfg, fit_strict);
    }
    if (zf->parsed()) {
      zf_spec.state = zf_state == "excited" ? State::Excited : State::Ground;
      return cmd_zefoz(zf_model, zf_spec, zf_out);
    }
    if (ec->parsed()) return cmd_echo_fit(ec_trace, ec_out, !ec_no_offset);
    if (tn->parsed()) return cmd_tensors(tn_model, tn_basis, tn_out);
  } catch (const MalformedInput& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const EmptyDataset& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const InsufficientData& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const DegenerateTrace& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const std::ios_base::failure& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
