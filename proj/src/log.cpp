#include "skyanchor/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

namespace skyanchor {

std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    if (auto existing = spdlog::get("skyanchor")) return existing;
    return spdlog::stderr_color_mt("skyanchor");
  }();
  return instance;
}

}  // namespace skyanchor
