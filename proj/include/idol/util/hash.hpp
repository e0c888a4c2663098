#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <string_view>

namespace idol::util {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(const std::string& s);

// Derives an independent seed for a named random substream. Mixing the label
// and index through the checksum keeps streams decorrelated without needing a
// global stream registry.
std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view label, std::uint64_t index = 0);

} // namespace idol::util
