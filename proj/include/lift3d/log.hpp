#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace lift3d {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity comes from LIFT3D_LOG (error|warn|info|debug), read once.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("LIFT3D_LOG");
    if (!env) return LogLevel::Info;
    std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "warn") return LogLevel::Warn;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

inline void log_line(LogLevel lvl, const std::string& msg) {
  if (lvl > log_level()) return;
  static const char* tags[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << tags[static_cast<int>(lvl)] << "] " << msg << "\n";
}

inline void log_error(const std::string& m) { log_line(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log_line(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log_line(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_line(LogLevel::Debug, m); }

}  // namespace lift3d
