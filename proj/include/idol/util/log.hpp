#pragma once

#include <sstream>
#include <string>

namespace idol::util {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from the IDOL_LOG environment variable (error, warn, info,
// debug) and defaults to info. Messages go to stderr so command output on
// stdout stays machine readable.
LogLevel log_level();
void set_log_level(LogLevel level);
void log_message(LogLevel level, const std::string& msg);

namespace detail {

template <class... Args>
std::string format_parts(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

} // namespace detail

template <class... Args>
void log_error(Args&&... args) {
    log_message(LogLevel::kError, detail::format_parts(std::forward<Args>(args)...));
}

template <class... Args>
void log_warn(Args&&... args) {
    log_message(LogLevel::kWarn, detail::format_parts(std::forward<Args>(args)...));
}

template <class... Args>
void log_info(Args&&... args) {
    log_message(LogLevel::kInfo, detail::format_parts(std::forward<Args>(args)...));
}

template <class... Args>
void log_debug(Args&&... args) {
    log_message(LogLevel::kDebug, detail::format_parts(std::forward<Args>(args)...));
}

} // namespace idol::util
