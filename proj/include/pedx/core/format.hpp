#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace pedx {

/// Every floating-point value written to disk goes through here: 9 significant digits.
inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace pedx
