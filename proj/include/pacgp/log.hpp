#pragma once

#include <string>

namespace pacgp {

/// Writes "pacgp: warning: <msg>" to stderr unless PACGP_QUIET is set.
/// Thread-safe.
void log_warning(const std::string& msg);
void log_info(const std::string& msg);

/// Set from the command line; info messages are dropped unless verbose.
void set_verbose(bool verbose);

}  // namespace pacgp
