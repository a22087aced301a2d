#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "vufold/phantom.hpp"

namespace vufold::cli {

// Process exit codes.
inline constexpr int kExitConverged = 0;
inline constexpr int kExitStageError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

nlohmann::json truth_to_json(const PhantomTruth& truth);

}  // namespace vufold::cli
