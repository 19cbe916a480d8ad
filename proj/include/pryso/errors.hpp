#pragma once

#include <stdexcept>
#include <string>

namespace pryso {

struct NonHermitianInput : std::runtime_error {
  explicit NonHermitianInput(const std::string& msg) : std::runtime_error(msg) {}
};

struct OutOfRange : std::out_of_range {
  explicit OutOfRange(const std::string& msg) : std::out_of_range(msg) {}
};

struct DegenerateLevels : std::runtime_error {
  explicit DegenerateLevels(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegeneracyError : std::runtime_error {
  explicit DegeneracyError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyDataset : std::runtime_error {
  explicit EmptyDataset(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularJacobian : std::runtime_error {
  explicit SingularJacobian(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularCurvature : std::runtime_error {
  explicit SingularCurvature(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientData : std::runtime_error {
  explicit InsufficientData(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateTrace : std::runtime_error {
  explicit DegenerateTrace(const std::string& msg) : std::runtime_error(msg) {}
};

struct MalformedInput : std::runtime_error {
  explicit MalformedInput(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pryso
