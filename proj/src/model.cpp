#include "pryso/model.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "pryso/errors.hpp"

namespace pryso {

using nlohmann::json;

const StateParams& state_params(const HamiltonianModel& m, State s) {
  return s == State::Ground ? m.ground : m.excited;
}

Eigen::Matrix3d d1d2b_axes(const HamiltonianModel& m) {
  Eigen::Matrix3d u;
  u.row(0) = unit_from_polar(m.axes.theta_d1, m.axes.phi_d1).transpose();
  u.row(1) = unit_from_polar(m.axes.theta_d2, m.axes.phi_d2).transpose();
  u.row(2) = m.c2.axis().transpose();
  return u;
}

Eigen::Matrix3d to_d1d2b(const Eigen::Matrix3d& lab_tensor,
                         const HamiltonianModel& m) {
  const Eigen::Matrix3d u = d1d2b_axes(m);
  return u.transpose() * lab_tensor * u;
}

namespace {

json state_to_json(const StateParams& s) {
  return json{
      {"zeeman",
       {{"alpha_deg", rad2deg(s.zeeman_angles.alpha)},
        {"beta_deg", rad2deg(s.zeeman_angles.beta)},
        {"gamma_deg", rad2deg(s.zeeman_angles.gamma)},
        {"g1_khz_per_g", s.g.g1},
        {"g2_khz_per_g", s.g.g2},
        {"g3_khz_per_g", s.g.g3}}},
      {"quadrupole",
       {{"alpha_deg", rad2deg(s.quad_angles.alpha)},
        {"beta_deg", rad2deg(s.quad_angles.beta)},
        {"gamma_deg", rad2deg(s.quad_angles.gamma)},
        {"e_mhz", s.q.e},
        {"d_mhz", s.q.d}}}};
}

StateParams state_from_json(const json& j) {
  StateParams s;
  const auto& z = j.at("zeeman");
  s.zeeman_angles = {deg2rad(z.at("alpha_deg").get<double>()),
                     deg2rad(z.at("beta_deg").get<double>()),
                     deg2rad(z.at("gamma_deg").get<double>())};
  s.g = {z.at("g1_khz_per_g").get<double>(), z.at("g2_khz_per_g").get<double>(),
         z.at("g3_khz_per_g").get<double>()};
  const auto& q = j.at("quadrupole");
  s.quad_angles = {deg2rad(q.at("alpha_deg").get<double>()),
                   deg2rad(q.at("beta_deg").get<double>()),
                   deg2rad(q.at("gamma_deg").get<double>())};
  s.q = {q.at("e_mhz").get<double>(), q.at("d_mhz").get<double>()};
  return s;
}

}  // namespace

std::string model_to_json_text(const HamiltonianModel& m) {
  json j;
  j["ground"] = state_to_json(m.ground);
  j["excited"] = state_to_json(m.excited);
  j["c2"] = {{"theta_deg", rad2deg(m.c2.theta)}, {"phi_deg", rad2deg(m.c2.phi)}};
  j["axes"] = {{"theta_d1_deg", rad2deg(m.axes.theta_d1)},
               {"phi_d1_deg", rad2deg(m.axes.phi_d1)},
               {"theta_d2_deg", rad2deg(m.axes.theta_d2)},
               {"phi_d2_deg", rad2deg(m.axes.phi_d2)}};
  return j.dump(2) + "\n";
}

HamiltonianModel model_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("model JSON parse error: ") + e.what());
  }
  try {
    HamiltonianModel m;
    m.ground = state_from_json(j.at("ground"));
    m.excited = state_from_json(j.at("excited"));
    m.c2 = {deg2rad(j.at("c2").at("theta_deg").get<double>()),
            deg2rad(j.at("c2").at("phi_deg").get<double>())};
    if (j.contains("axes")) {
      const auto& a = j["axes"];
      m.axes = {deg2rad(a.at("theta_d1_deg").get<double>()),
                deg2rad(a.at("phi_d1_deg").get<double>()),
                deg2rad(a.at("theta_d2_deg").get<double>()),
                deg2rad(a.at("phi_d2_deg").get<double>())};
    }
    return m;
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("model JSON missing field: ") + e.what());
  }
}

HamiltonianModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json_text(ss.str());
}

void save_model(const HamiltonianModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write model file: " + path);
  out << model_to_json_text(m);
}

std::string model_hash(const HamiltonianModel& m) {
  const std::string text = model_to_json_text(m);
  const size_t h = std::hash<std::string>{}(text);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

HamiltonianModel site2_table1() {
  HamiltonianModel m;
  m.ground.zeeman_angles = {deg2rad(16.0761), deg2rad(-72.572), deg2rad(-80.549)};
  m.ground.g = {4.6459, 2.1125, 3.1497};
  m.ground.quad_angles = {deg2rad(111.94258), deg2rad(73.2580), deg2rad(-45.794)};
  m.ground.q = {-0.305891, -1.32776};
  m.excited.zeeman_angles = {deg2rad(142.73), deg2rad(87.00), deg2rad(-139.07)};
  m.excited.g = {1.732704, 1.351342, 1.559799};
  m.excited.quad_angles = {deg2rad(42.2215), deg2rad(-60.7753), deg2rad(-19.1996)};
  m.excited.q = {0.216943, -0.65140};
  m.c2 = {deg2rad(2.169), deg2rad(15.99)};
  return m;
}

}  // namespace pryso
