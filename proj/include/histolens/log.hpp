#pragma once

#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace histolens {

/// Library-wide logger ("histolens"). Tests attach extra sinks to count lines.
inline std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("histolens");
    if (existing) return existing;
    auto l = spdlog::stderr_color_mt("histolens");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return instance;
}

}  // namespace histolens
