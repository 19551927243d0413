#pragma once

#include <stdexcept>
#include <string>

namespace csitk {

// Invalid configuration (bad dimensions, empty path lists, out-of-range knobs).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched tensor/matrix shapes between operands.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data that is structurally valid but unusable (zero variance, zero power).
class DegenerateInputError : public std::runtime_error {
 public:
  explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted (non-finite loss, usually a diverging learning rate).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace csitk
