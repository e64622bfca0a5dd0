#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace sparseloc {

/// %.17g, with "nan", "inf", "-inf" spelled out.
std::string fmt(double x);
std::string fmt(long long x);
inline std::string fmt(int x) { return fmt(static_cast<long long>(x)); }
inline std::string fmt(unsigned long long x) { return std::to_string(x); }
inline std::string fmt(bool x) { return x ? "true" : "false"; }

/// Minimal CSV builder: fields are written verbatim, one row per line.
class Csv {
public:
    explicit Csv(std::initializer_list<std::string> header);
    explicit Csv(std::vector<std::string> header);

    void row(std::vector<std::string> fields);
    const std::string& str() const { return text_; }
    std::size_t rows() const { return rows_; }

private:
    std::size_t width_;
    std::size_t rows_ = 0;
    std::string text_;
};

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace sparseloc
