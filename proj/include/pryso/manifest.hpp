#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace pryso {

inline constexpr const char* kToolVersion = "0.1.0";

/// One manifest is written alongside the outputs of every CLI run, with the
/// fully resolved configuration so the run can be reproduced exactly.
struct RunManifest {
  std::string subcommand;
  nlohmann::json config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
};

void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace pryso
