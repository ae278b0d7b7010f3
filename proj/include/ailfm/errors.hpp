#pragma once

#include <stdexcept>
#include <string>

namespace ailfm {

// Exit codes used by the CLI map onto these categories.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DecisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ailfm
