#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace idol::util {

// Counter-based seeding helper (splitmix64). Used only to expand a 64-bit
// seed into the 256-bit xoshiro state.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256++ generator with Box-Muller normals. The standard library
// distributions are implementation defined, so runs would not be reproducible
// across toolchains; this generator produces identical streams everywhere and
// its four words of state serialize directly into checkpoints.
class Rng {
public:
    Rng() : Rng(0x6a09e667f3bcc908ull) {}
    explicit Rng(std::uint64_t seed);
    Rng(std::uint64_t root_seed, std::string_view label, std::uint64_t index = 0);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller. Pairs are generated eagerly and the
    // spare is cached, so the consumed stream position depends only on the
    // number of calls.
    double normal();
    double normal(double mean, double stddev);

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    // Fisher-Yates shuffle of [0, n) written into out.
    template <class Vec>
    void shuffle_indices(Vec& out, std::size_t n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<typename Vec::value_type>(i);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(out[i - 1], out[j]);
        }
    }

    // State round trips as "w0,w1,w2,w3,cached,spare" where the words are hex
    // and the Box-Muller cache is preserved bit exactly.
    std::string serialize() const;
    static Rng deserialize(const std::string& text);

private:
    std::array<std::uint64_t, 4> s_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace idol::util
