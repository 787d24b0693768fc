#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace fermibgk {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level comes from FERMIBGK_LOG in {error, info, debug}; default info.
inline LogLevel log_level()
{
    static const LogLevel level = [] {
        const char* env = std::getenv("FERMIBGK_LOG");
        if (env && std::strcmp(env, "error") == 0)
            return LogLevel::error;
        if (env && std::strcmp(env, "debug") == 0)
            return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

inline void log_line(LogLevel level, const std::string& msg)
{
    if (level > log_level())
        return;
    const char* tag = level == LogLevel::error ? "error" : level == LogLevel::info ? "info" : "debug";
    std::fprintf(stderr, "[fermibgk %s] %s\n", tag, msg.c_str());
}

inline void log_error(const std::string& msg) { log_line(LogLevel::error, msg); }
inline void log_info(const std::string& msg) { log_line(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_line(LogLevel::debug, msg); }

} // namespace fermibgk
