#ifndef STEERLAB_ERRORS_HPP
#define STEERLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace steerlab {

// Exit-code contract: 0 success, 2 config/input error, 3 policy failure,
// 4 training divergence, 5 corrupt artifact.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PolicyError : std::runtime_error {
  explicit PolicyError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainingError : std::runtime_error {
  std::string last_good_checkpoint;  // may be empty
  explicit TrainingError(const std::string& msg, std::string ckpt = {})
      : std::runtime_error(msg), last_good_checkpoint(std::move(ckpt)) {}
};

struct ArtifactError : std::runtime_error {
  explicit ArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace steerlab

#endif  // STEERLAB_ERRORS_HPP
