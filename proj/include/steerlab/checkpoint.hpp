#ifndef STEERLAB_CHECKPOINT_HPP
#define STEERLAB_CHECKPOINT_HPP

#include <string>

#include "steerlab/lm.hpp"
#include "steerlab/sae.hpp"

namespace steerlab {

// Versioned checkpoint container: 8-byte magic, u64 little-endian JSON header
// length, JSON header (schema version, kind, architecture config, vocabulary,
// tensor directory), then the tensors as raw little-endian doubles in
// declared row-major order. Round trips are bit-exact.
inline constexpr char kCheckpointMagic[8] = {'S', 'L', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr int kCheckpointSchemaVersion = 1;

void save_toy_lm(const std::string& path, const ToyLm& model);
ToyLm load_toy_lm(const std::string& path);  // throws ArtifactError on corruption

void save_sae(const std::string& path, const SaeModel& sae);
SaeModel load_sae(const std::string& path);

// Kind stored in a checkpoint header ("toy_lm" or "sae"); ArtifactError if
// the file is not a valid container.
std::string checkpoint_kind(const std::string& path);

}  // namespace steerlab

#endif  // STEERLAB_CHECKPOINT_HPP
