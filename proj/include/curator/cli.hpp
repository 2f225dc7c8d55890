#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace curator::cli {

/// Process environment seen by one invocation.
struct CliEnv {
  std::optional<std::filesystem::path> curatorDir;  // CURATOR_DIR
  std::optional<std::string> author;                // CURATOR_AUTHOR
  std::filesystem::path cwd;
};

/// Runs one command line (`args` excludes the program name).
/// Returns 0 on success, 1 on a domain error (reported on `err` as
/// `error: <Code>: <message>`) and 2 on a usage error.
int runCli(const std::vector<std::string>& args, const CliEnv& env, std::ostream& out, std::ostream& err);

/// Environment of the current process.
CliEnv processEnv();

}  // namespace curator::cli
