#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qpc {

struct CommandArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;
};

// Each command loads its config, runs the experiment, writes its artifacts
// into out_dir and returns the paths written. Bad input throws ConfigError
// or std::invalid_argument; numerical failures throw std::runtime_error.
std::vector<std::string> cmd_fringe(const CommandArgs& args);
std::vector<std::string> cmd_state_sweep(const CommandArgs& args);
std::vector<std::string> cmd_tomo(const CommandArgs& args);
std::vector<std::string> cmd_calibrate(const CommandArgs& args);

}  // namespace qpc
