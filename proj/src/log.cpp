#include "backbone_cdn/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace backbone_cdn::log {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("backbone-cdn");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

bool init_from_env() {
  const char* raw = std::getenv("BACKBONE_CDN_LOG_LEVEL");
  if (raw == nullptr) return true;
  const std::string_view v(raw);
  spdlog::level::level_enum lvl;
  if (v == "error") {
    lvl = spdlog::level::err;
  } else if (v == "warn") {
    lvl = spdlog::level::warn;
  } else if (v == "info") {
    lvl = spdlog::level::info;
  } else if (v == "debug") {
    lvl = spdlog::level::debug;
  } else {
    return false;
  }
  logger().set_level(lvl);
  return true;
}

}  // namespace backbone_cdn::log
