#pragma once

#include <cctype>
#include <chrono>
#include <ctime>
#include <string>
#include <string_view>

#include "dbot/error.hpp"

namespace dbot::util {

// Calendar dates are ISO-8601 "YYYY-MM-DD"; timestamps extend that with a
// time-of-day suffix. Lexicographic comparison is chronological for both, so
// dates stay plain validated strings.
inline bool is_iso_date(std::string_view text) {
    if (text.size() != 10) return false;
    for (std::size_t i = 0; i < 10; ++i) {
        if (i == 4 || i == 7) {
            if (text[i] != '-') return false;
        } else if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            return false;
        }
    }
    int month = (text[5] - '0') * 10 + (text[6] - '0');
    int day = (text[8] - '0') * 10 + (text[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

inline bool is_iso_timestamp(std::string_view text) {
    return text.size() >= 10 && is_iso_date(text.substr(0, 10));
}

inline std::string require_iso_date(std::string_view text, const std::string& field) {
    if (!is_iso_date(text))
        raise(ErrorCode::SchemaViolation, field + ": expected ISO-8601 date, got \"" + std::string(text) + "\"");
    return std::string(text);
}

inline std::string date_of_timestamp(std::string_view timestamp) {
    return std::string(timestamp.substr(0, 10));
}

inline std::string today_utc() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", parts.tm_year + 1900, parts.tm_mon + 1, parts.tm_mday);
    return std::string(buf);
}

inline std::string now_utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", parts.tm_year + 1900, parts.tm_mon + 1,
                  parts.tm_mday, parts.tm_hour, parts.tm_min, parts.tm_sec);
    return std::string(buf);
}

// Injectable run clock: backtests pin it to the fixture date so nothing
// post-dated can leak into a run.
struct RunClock {
    std::string today;

    static RunClock system() { return RunClock{today_utc()}; }
    static RunClock at(const std::string& date) { return RunClock{require_iso_date(date, "run_clock")}; }
};

} // namespace dbot::util
