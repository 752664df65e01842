#ifndef PGM_CLI_HPP
#define PGM_CLI_HPP

#include <string>
#include <vector>

namespace pgm::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one command (args exclude the program name). Writes artifacts plus
/// a manifest into the run's output directory. Returns the process exit
/// status; failures print one machine-parsable line
/// "error: <category>: <detail>" to stderr.
int run(std::vector<std::string> args);

}  // namespace pgm::cli

#endif
