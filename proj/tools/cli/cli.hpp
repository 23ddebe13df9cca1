#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hgff::cli {

inline constexpr int schema_version = 1;
inline constexpr const char* artifact_version = "hgff 0.1.0";

enum ExitCode : int { ok = 0, config_error = 2, numerical_error = 3, inconclusive = 4 };

// Parses args (argv[0] included), runs the subcommand and writes JSON lines to
// `out` unless --output redirects them. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hgff::cli
