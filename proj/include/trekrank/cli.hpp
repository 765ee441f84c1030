#ifndef TREKRANK_CLI_HPP
#define TREKRANK_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace trekrank {

/// Dispatch a command line. Machine-readable JSON goes to `out`, diagnostics
/// to `err`. Returns 0 on success, 1 on domain errors, 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace trekrank

#endif  // TREKRANK_CLI_HPP
