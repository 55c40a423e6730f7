#pragma once

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace ladr {

/// Routes library logging to stderr at the level named by LADR_LOG
/// (trace, debug, info, warn, error, critical, off). Defaults to warn.
inline void init_logging() {
    auto logger = spdlog::get("ladr");
    if (!logger) {
        logger = spdlog::stderr_color_mt("ladr");
        logger->set_pattern("[%l] %v");
    }
    spdlog::set_default_logger(logger);
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("LADR_LOG"); env && *env) {
        level = spdlog::level::from_str(env);
    }
    spdlog::set_level(level);
}

}  // namespace ladr
