#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "spinodal/errors.hpp"

// Verification records and their JSONL serialization. Every statistical
// check is certified at z = 3 combined standard errors; a check fails only
// when the slack is below -3 sigma (or outside the +-3 sigma band for
// two-sided comparisons).

namespace spinodal {

inline constexpr double kSigmaGate = 3.0;

// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct CheckReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double stderr_lhs = 0.0;
    double stderr_rhs = 0.0;
    double slack = 0.0;        // rhs - lhs
    bool pass = false;
    long long ensemble = 0;
    std::uint64_t seed = 0;
    bool advisory = false;     // excluded from the exit-code gate
    bool two_sided = false;    // pass means |slack| within the 3 sigma band
};

inline CheckReport make_check(std::string name, double lhs, double rhs, double stderr_lhs,
                              double stderr_rhs, long long ensemble, std::uint64_t seed) {
    CheckReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.stderr_lhs = stderr_lhs;
    r.stderr_rhs = stderr_rhs;
    r.slack = rhs - lhs;
    r.pass = r.slack >= -kSigmaGate * (stderr_lhs + stderr_rhs);
    r.ensemble = ensemble;
    r.seed = seed;
    return r;
}

inline CheckReport make_band_check(std::string name, double lhs, double rhs, double stderr_lhs,
                                   double stderr_rhs, long long ensemble, std::uint64_t seed) {
    CheckReport r = make_check(std::move(name), lhs, rhs, stderr_lhs, stderr_rhs, ensemble, seed);
    r.two_sided = true;
    r.pass = std::abs(r.slack) <= kSigmaGate * (stderr_lhs + stderr_rhs);
    return r;
}

inline std::string escape_json(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
            out.push_back(c);
        } else if (static_cast<unsigned char>(c) < 0x20) {
            char hex[8];
            std::snprintf(hex, sizeof(hex), "\\u%04x", static_cast<unsigned>(c));
            out += hex;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

inline std::string to_jsonl(const CheckReport& r) {
    std::string line = "{\"name\":\"";
    line += escape_json(r.name);
    line += "\",\"lhs\":";
    line += format_double(r.lhs);
    line += ",\"rhs\":";
    line += format_double(r.rhs);
    line += ",\"stderr_lhs\":";
    line += format_double(r.stderr_lhs);
    line += ",\"stderr_rhs\":";
    line += format_double(r.stderr_rhs);
    line += ",\"slack\":";
    line += format_double(r.slack);
    line += ",\"pass\":";
    line += r.pass ? "true" : "false";
    line += ",\"ensemble\":";
    line += std::to_string(r.ensemble);
    line += ",\"seed\":";
    line += std::to_string(r.seed);
    line += "}";
    return line;
}

// Ordered mean/stderr reduction; NaN entries mark failed paths and are
// skipped deterministically.
struct MeanStderr {
    double mean = 0.0;
    double se = 0.0;
    long long n = 0;
};

inline MeanStderr reduce_mean(const std::vector<double>& values) {
    MeanStderr out;
    double sum = 0.0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        sum += v;
        ++out.n;
    }
    if (out.n == 0) throw EstimatorError("reduce_mean: no usable paths");
    out.mean = sum / static_cast<double>(out.n);
    double ss = 0.0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        const double d = v - out.mean;
        ss += d * d;
    }
    if (out.n > 1)
        out.se = std::sqrt(ss / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
    return out;
}

}  // namespace spinodal
