#pragma once

// Command-line entry point. Every subcommand except fsck reads one JSON
// config and writes under <runs_root>/<run_id>/; rerunning a complete run
// with the same config and inputs does nothing.
//
// Relative paths inside a config resolve against the config file's
// directory. runs_root defaults to ./runs.
//
// Exit status: 0 success, 1 runtime failure, 2 config error, 3 partial
// completion, 64 usage error.

#include <iosfwd>

namespace psteer::workbench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPartial = 3;
inline constexpr int kExitUsage = 64;

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace psteer::workbench
