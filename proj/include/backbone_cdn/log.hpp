#pragma once

// Diagnostics go to stderr through one spdlog logger. The level comes from
// BACKBONE_CDN_LOG_LEVEL (error, warn, info, debug); default warn.

#include <spdlog/spdlog.h>

namespace backbone_cdn::log {

spdlog::logger& logger();

/// Applies BACKBONE_CDN_LOG_LEVEL; returns false (and keeps the default) on an unknown value.
bool init_from_env();

template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().debug(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().info(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().warn(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void error(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().error(fmt, std::forward<Args>(args)...);
}

}  // namespace backbone_cdn::log
