#pragma once

#include <phwh/linalg.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

namespace phwh::csv {

/// Shortest decimal string that round-trips to the same double ('.' decimal point).
inline std::string format(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format(std::int64_t v) {
    return std::to_string(v);
}

inline std::string format(std::uint64_t v) {
    return std::to_string(v);
}

inline std::string format(std::string_view v) {
    return std::string(v);
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) {
            throw std::runtime_error("cannot open " + path + " for writing");
        }
    }

    void line(std::string_view text) { out_ << text << '\n'; }

    template <class... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ",") << format(fields), first = false), ...);
        out_ << '\n';
    }

    void row(const RowVector& v) {
        for (Index i = 0; i < v.size(); ++i) {
            out_ << (i ? "," : "") << format(v(i));
        }
        out_ << '\n';
    }

    void matrix(const Matrix& m) {
        for (Index i = 0; i < m.rows(); ++i) {
            row(RowVector(m.row(i)));
        }
    }

private:
    std::ofstream out_;
};

} // namespace phwh::csv
