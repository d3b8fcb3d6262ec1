#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <system_error>

namespace tanglesim {

// Locale-independent shortest round-trip formatting (decimal point, no
// grouping); golden CSV files depend on it.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

inline std::string format_fixed(double v, int precision) {
    char buf[80];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, end);
}

// Absent metrics render as empty cells, never as zero.
inline std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

}  // namespace tanglesim
