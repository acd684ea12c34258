#pragma once

#include <iostream>
#include <string>

namespace emu {

/// Progress and warnings go to stderr; artifacts only ever go to files.
inline bool& log_quiet() {
    static bool quiet = false;
    return quiet;
}

inline void log_info(const std::string& msg) {
    if (!log_quiet())
        std::cerr << "[emu] " << msg << '\n';
}

inline void log_warn(const std::string& msg) {
    if (!log_quiet())
        std::cerr << "[emu] warning: " << msg << '\n';
}

} // namespace emu
