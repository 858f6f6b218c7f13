#pragma once

#include <cstdio>
#include <span>
#include <string>

namespace delayrl {

/// Decimal form that round-trips a double exactly (%.17g).
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Short human-oriented form (%g), for labels and directory names.
inline std::string format_compact(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", x);
    return buf;
}

inline std::string join_doubles(std::span<const double> xs, char sep = ' ') {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out.push_back(sep);
        out += format_double(xs[i]);
    }
    return out;
}

}  // namespace delayrl
