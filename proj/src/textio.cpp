#include "sparseloc/textio.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <openssl/evp.h>

namespace sparseloc {

std::string fmt(double x) {
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt(long long x) { return std::to_string(x); }

Csv::Csv(std::initializer_list<std::string> header) : Csv(std::vector<std::string>(header)) {}

Csv::Csv(std::vector<std::string> header) : width_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i)
            text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

void Csv::row(std::vector<std::string> fields) {
    if (fields.size() != width_)
        throw std::logic_error("csv row width does not match the header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            text_ += ',';
        text_ += fields[i];
    }
    text_ += '\n';
    ++rows_;
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xf];
    }
    return out;
}

}  // namespace sparseloc
