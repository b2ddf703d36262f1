#pragma once

#include <string>

namespace cipca {

// Sets library log verbosity from a level name (trace, debug, info, warn,
// error, critical, off). Unknown names leave the level unchanged and return false.
bool set_log_level(const std::string& level);

// Reads CIPCA_LOG; defaults to "warn" when unset.
void init_logging_from_env();

}  // namespace cipca
