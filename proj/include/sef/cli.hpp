#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sef::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kRuntime = 3 };

/// Flat key=value lines; '#' starts a comment. Keys are long flag names.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Expands `--config FILE` into flags placed right after the subcommand name,
/// so flags given on the command line take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

/// Entry point behind the `sef` executable. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sef::cli
