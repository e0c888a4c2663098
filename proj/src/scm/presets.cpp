#include "idol/scm/presets.hpp"

#include "idol/util/errors.hpp"
#include "idol/util/rng.hpp"

namespace idol::scm {

namespace {

std::vector<double> eye(int n) {
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i) * n + i] = 1.0;
    return m;
}

std::vector<double> zeros(int n) {
    return std::vector<double>(static_cast<std::size_t>(n) * n, 0.0);
}

// z[t, i-1] -> z[t, i] for every i > 0.
std::vector<double> chain_v(int n) {
    auto m = zeros(n);
    for (int i = 1; i < n; ++i) m[static_cast<std::size_t>(i) * n + (i - 1)] = 1.0;
    return m;
}

// Fixed dense matrix with every entry nonzero. Magnitudes sit in
// [0.1, 0.5] with random signs: large enough that the support is
// recoverable, small enough that the multiplicative noise recursion stays
// bounded over long horizons (a unit-scale dense W diverges within tens of
// steps at n = 8). The stream label pins the matrix, it never varies by run.
std::vector<double> dense_w(int n, std::uint64_t stream) {
    util::Rng rng(0x1dc0ffee, "dense-preset", stream);
    auto m = zeros(n);
    for (auto& v : m) {
        const double mag = rng.uniform(0.1, 0.5);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return m;
}

Preset make(const std::string& name, int n, std::vector<double> w, std::vector<double> v) {
    Preset p;
    p.name = name;
    p.process.n = n;
    p.process.w = std::move(w);
    p.process.v = std::move(v);
    p.mixing.n = n;
    p.mixing.depth = 2;
    p.process.validate();
    return p;
}

} // namespace

Preset preset(const std::string& name) {
    if (name == "A") {
        // 1-based support: W(1,1), W(1,2), W(2,2), W(3,3); chain V.
        std::vector<double> w = {1, 1, 0,
                                 0, 1, 0,
                                 0, 0, 1};
        return make(name, 3, std::move(w), chain_v(3));
    }
    if (name == "B") {
        // Identity plus two extra delayed couplings, (1,2) and (3,4) 1-based.
        auto w = eye(5);
        w[0 * 5 + 1] = 1.0;
        w[2 * 5 + 3] = 1.0;
        return make(name, 5, std::move(w), chain_v(5));
    }
    if (name == "C") return make(name, 8, eye(8), chain_v(8));
    if (name == "D") return make(name, 8, dense_w(8, 0), zeros(8));
    if (name == "E") return make(name, 8, dense_w(8, 1), chain_v(8));
    if (name == "F") return make(name, 16, eye(16), chain_v(16));
    throw ConfigError("unknown preset '" + name + "'; valid presets: " + preset_names());
}

std::string preset_names() { return "A B C D E F"; }

} // namespace idol::scm
