#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smn {

/// Subcommands: simulate, fit, fit-multi, network, cluster, corr-dist,
/// report. Returns 0 on success, 1 for invalid input or usage, 2 for
/// numerical or runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace smn
