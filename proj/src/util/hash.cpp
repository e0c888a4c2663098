#include "idol/util/hash.hpp"

#include <array>
#include <cstdio>

#include "idol/util/errors.hpp"

namespace idol::util {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::uint64_t parse_hex64(const std::string& s) {
    if (s.empty() || s.size() > 16) {
        throw DataError("parse_hex64: expected 1..16 hex digits, got '" + s + "'");
    }
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
        else throw DataError("parse_hex64: invalid hex digit in '" + s + "'");
    }
    return v;
}

std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view label, std::uint64_t index) {
    std::uint64_t h = kFnvOffset;
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(root_seed >> (8 * i));
    h = fnv1a64(b.data(), b.size(), h);
    h = fnv1a64(label, h);
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(index >> (8 * i));
    h = fnv1a64(b.data(), b.size(), h);
    // A zero seed would collapse the xoshiro state, avoid it deterministically.
    return h == 0 ? kFnvPrime : h;
}

} // namespace idol::util
