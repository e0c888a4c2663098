#include "idol/util/rng.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "idol/util/errors.hpp"
#include "idol/util/hash.hpp"

namespace idol::util {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
}

Rng::Rng(std::uint64_t root_seed, std::string_view label, std::uint64_t index)
    : Rng(derive_seed(root_seed, label, index)) {}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Rejection keeps u1 strictly positive so the log is finite.
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

double Rng::normal(double mean, double stddev) {
    return mean + stddev * normal();
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::below called with n = 0");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << hex64(s_[0]) << ',' << hex64(s_[1]) << ',' << hex64(s_[2]) << ',' << hex64(s_[3]);
    os << ',' << (have_spare_ ? 1 : 0) << ',';
    os << hex64(std::bit_cast<std::uint64_t>(spare_));
    return os.str();
}

Rng Rng::deserialize(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    if (parts.size() != 6) {
        throw DataError("Rng::deserialize: expected 6 comma separated fields, got " +
                        std::to_string(parts.size()));
    }
    Rng r(0);
    for (int i = 0; i < 4; ++i) r.s_[i] = parse_hex64(parts[i]);
    r.have_spare_ = parts[4] == "1";
    r.spare_ = std::bit_cast<double>(parse_hex64(parts[5]));
    return r;
}

} // namespace idol::util
