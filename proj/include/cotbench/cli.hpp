#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cotbench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one `cotbench` command line (args excludes the program name).
///
/// Endpoint arguments (--target, --judge) name JSON files holding an endpoint
/// config. An optional "mock_script" key (resolved relative to that file)
/// routes the endpoint's base_url to a scripted offline backend.
///
/// Returns 0 on success, 1 on a usage error (usage on `err`), 2 on a runtime
/// error (message on `err`).
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cotbench
