#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace splitsim::log {

enum class Level : int { Debug = 0, Info = 1, Warn = 2, Error = 3 };

/// Verbosity comes from SPLITSIM_LOG (debug|info|warn|error); default warn.
inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("SPLITSIM_LOG");
        if (env == nullptr) return Level::Warn;
        if (std::strcmp(env, "debug") == 0) return Level::Debug;
        if (std::strcmp(env, "info") == 0) return Level::Info;
        if (std::strcmp(env, "error") == 0) return Level::Error;
        return Level::Warn;
    }();
    return lvl;
}

inline void emit(Level lvl, const char* tag, const std::string& msg) {
    if (static_cast<int>(lvl) < static_cast<int>(threshold())) return;
    std::fprintf(stderr, "[splitsim %s] %s\n", tag, msg.c_str());
}

inline void debug(const std::string& msg) { emit(Level::Debug, "debug", msg); }
inline void info(const std::string& msg) { emit(Level::Info, "info", msg); }
inline void warn(const std::string& msg) { emit(Level::Warn, "warn", msg); }
inline void error(const std::string& msg) { emit(Level::Error, "error", msg); }

} // namespace splitsim::log
