#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace skyanchor {

/// Shared logger writing to standard error.
std::shared_ptr<spdlog::logger> logger();

}  // namespace skyanchor
