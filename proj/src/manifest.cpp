#include "pryso/manifest.hpp"

#include <fstream>

namespace pryso {

void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j = {{"subcommand", m.subcommand},
                      {"tool_version", kToolVersion},
                      {"config", m.config},
                      {"inputs", m.inputs},
                      {"outputs", m.outputs},
                      {"seed", m.seed},
                      {"duration_s", m.duration_s}};
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pryso
