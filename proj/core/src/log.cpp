#include <cstdlib>
#include <spdlog/sinks/stdout_color_sinks.h>

#include "cipca/logging.hpp"
#include "log.hpp"

namespace cipca {

bool set_log_level(const std::string& level) {
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") return false;
  spdlog::set_level(parsed);
  return true;
}

void init_logging_from_env() {
  static bool configured = false;
  if (!configured) {
    // Diagnostics go to stderr so stdout stays machine-readable.
    spdlog::set_default_logger(spdlog::stderr_color_mt("cipca"));
    configured = true;
  }
  const char* env = std::getenv("CIPCA_LOG");
  if (!env || !set_log_level(env)) spdlog::set_level(spdlog::level::warn);
}

}  // namespace cipca
