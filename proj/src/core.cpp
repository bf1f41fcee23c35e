#include "psteer/core.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>

namespace psteer {

std::string to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

std::string to_string(ExtractionMode m) { return m == ExtractionMode::b ? "b" : "s"; }

std::string to_string(Method m) {
    switch (m) {
        case Method::L1LI: return "L1LI";
        case Method::L1ZI: return "L1ZI";
        case Method::L2LI: return "L2LI";
        case Method::L2ZI: return "L2ZI";
        case Method::MDB: return "MDB";
        case Method::MDS: return "MDS";
    }
    return "?";
}

std::string to_string(Regularization r) { return r == Regularization::L1 ? "L1" : "L2"; }

std::string to_string(Intercept i) { return i == Intercept::LI ? "LI" : "ZI"; }

Direction direction_from_string(std::string_view s) {
    if (s == "up" || s == "+" || s == "↑") return Direction::up;
    if (s == "down" || s == "-" || s == "↓") return Direction::down;
    throw ConfigError("unknown direction '" + std::string(s) + "'");
}

ExtractionMode mode_from_string(std::string_view s) {
    if (s == "b") return ExtractionMode::b;
    if (s == "s") return ExtractionMode::s;
    throw ConfigError("unknown extraction mode '" + std::string(s) + "'");
}

Method method_from_string(std::string_view s) {
    for (auto m : kAllMethods)
        if (to_string(m) == s) return m;
    throw ConfigError("unknown method '" + std::string(s) + "'");
}

Method probe_method(Regularization r, Intercept i) {
    if (r == Regularization::L1) return i == Intercept::LI ? Method::L1LI : Method::L1ZI;
    return i == Intercept::LI ? Method::L2LI : Method::L2ZI;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string format_number(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return buf;
    }
    return std::string(buf, ptr);
}

}  // namespace psteer
