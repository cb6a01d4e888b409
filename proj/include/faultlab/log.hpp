#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace faultlab::log {

enum class Level { debug = 0, info = 1, warn = 2, quiet = 3 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::warn};
    return level;
}

inline void set_level(Level l) { threshold().store(l); }

inline void write(Level l, std::string_view tag, std::string_view msg) {
    if (l < threshold().load()) return;
    std::clog << "[faultlab " << tag << "] " << msg << '\n';
}

inline void debug(std::string_view msg) { write(Level::debug, "debug", msg); }
inline void info(std::string_view msg) { write(Level::info, "info", msg); }
inline void warn(std::string_view msg) { write(Level::warn, "warn", msg); }

}  // namespace faultlab::log
