#pragma once

#include <string>
#include <vector>

namespace bdab::cli {

/// Entry point shared by the binary and the tests. Returns the process exit
/// code: 0 on tolerance termination, 2 on max-iteration termination, 1 on
/// input or I/O errors.
int run(const std::vector<std::string>& args);

}  // namespace bdab::cli
