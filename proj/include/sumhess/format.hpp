#pragma once

/// Locale-independent number formatting shared by field dumps and report
/// writers: shortest decimal string that round-trips to the same double.

#include <charconv>
#include <string>

namespace sumhess {

[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace sumhess
