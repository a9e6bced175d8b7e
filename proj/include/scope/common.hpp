#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scope {

namespace detail {

inline void str_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void str_append(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    str_append(os, rest...);
}

template <typename... Args>
std::string str(const Args&... args) {
    std::ostringstream os;
    str_append(os, args...);
    return os.str();
}

}  // namespace detail

/// Raised when an input file or configuration is invalid.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
    throw std::runtime_error(detail::str(args...));
}

template <typename... Args>
[[noreturn]] void fail_config(const Args&... args) {
    throw ConfigError(detail::str(args...));
}

/// Dense row-major matrix of doubles. Small and allocation-friendly; all the
/// numeric code in this library works on rows as spans.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data.data() + r * cols, cols);
    }
    std::span<double> row(std::size_t r) {
        return std::span<double>(data.data() + r * cols, cols);
    }

    void push_row(std::span<const double> v) {
        if (rows == 0 && cols == 0) cols = v.size();
        if (v.size() != cols) fail("push_row: width ", v.size(), " != ", cols);
        data.insert(data.end(), v.begin(), v.end());
        ++rows;
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) fail("cannot format double");
    return std::string(buf, res.ptr);
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Population standard deviation (divisor n).
inline double stddev_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace scope
