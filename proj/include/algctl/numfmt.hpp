#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <system_error>

#include "algctl/errors.hpp"

namespace algctl {

// Shortest decimal string that round-trips to the same double. Used for all
// emitted numbers so golden files are byte-stable.
inline std::string fmt_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

// 17 significant digits, enough to reconstruct any double exactly.
inline std::string fmt_double_17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline double parse_double(std::string_view s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error("not a number: '" + std::string(s) + "'");
    return v;
}

} // namespace algctl
