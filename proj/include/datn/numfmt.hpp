#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

namespace datn {

// Shortest decimal that round-trips the exact double. Used by the trace
// format and answers files so replays are bit-exact across runs.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("bad real literal: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("bad integer literal: '" + std::string(s) + "'");
    return v;
}

}  // namespace datn
