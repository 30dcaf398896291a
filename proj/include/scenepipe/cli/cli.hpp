#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenepipe/core/config.hpp"

namespace scenepipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// defaults <- config file (explicit path, else $SCENEPIPE_CONFIG) <- overrides.
// Override keys are config field names.
core::TrainConfig resolve_config(const std::optional<std::filesystem::path>& file,
                                 const std::map<std::string, std::string>& overrides);

// Runs one subcommand; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace scenepipe::cli
