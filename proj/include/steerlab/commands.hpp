#ifndef STEERLAB_COMMANDS_HPP
#define STEERLAB_COMMANDS_HPP

#include <string>

#include "steerlab/config.hpp"

namespace steerlab {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes shared by the CLI and the tests.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPolicy = 3;
inline constexpr int kExitTraining = 4;
inline constexpr int kExitArtifact = 5;

// Resolves the output directory: explicit --out wins, otherwise a fresh
// directory named by command, config hash, and timestamp. Created on return.
std::string resolve_out_dir(const RunConfig& cfg, const std::string& explicit_out,
                            const std::string& command);

void cmd_train(const RunConfig& cfg, const std::string& out_dir);
void cmd_screen(const RunConfig& cfg, const std::string& out_dir);
void cmd_simulate(const RunConfig& cfg, const std::string& out_dir);
void cmd_dashboard(const RunConfig& cfg, const std::string& out_dir);
void cmd_sweep(const RunConfig& cfg, const std::string& out_dir);

}  // namespace steerlab

#endif  // STEERLAB_COMMANDS_HPP
