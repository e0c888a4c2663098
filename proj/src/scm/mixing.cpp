#include "idol/scm/mixing.hpp"

#include <string>

#include "idol/util/errors.hpp"
#include "idol/util/hash.hpp"
#include "idol/util/linalg.hpp"
#include "idol/util/log.hpp"
#include "idol/util/rng.hpp"

namespace idol::scm {

void MixingSpec::validate() const {
    if (n < 1) throw ConfigError("mixing spec: n must be at least 1");
    if (depth < 0) throw ConfigError("mixing spec: depth must be nonnegative");
    if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("mixing spec: slope must be in (0, 1)");
    if (static_cast<int>(weights.size()) != depth) {
        throw ConfigError("mixing spec: expected " + std::to_string(depth) + " weight matrices, got " +
                          std::to_string(weights.size()));
    }
    for (const auto& wmat : weights) {
        if (static_cast<int>(wmat.size()) != n * n) {
            throw ConfigError("mixing spec: every weight matrix must be n x n");
        }
        double cond = 0.0;
        try {
            cond = util::condition_number(wmat, n);
        } catch (const NumericError&) {
            throw ConfigError("mixing spec: weight matrix is singular");
        }
        if (!(cond <= kMaxMixingCondition)) {
            throw ConfigError("mixing spec: weight condition number " + std::to_string(cond) +
                              " exceeds " + std::to_string(kMaxMixingCondition));
        }
    }
}

MixingSpec make_random_mixing(int n, int depth, std::uint64_t seed, double slope) {
    MixingSpec m;
    m.n = n;
    m.depth = depth;
    m.slope = slope;
    m.seed = seed;
    m.weights.reserve(static_cast<std::size_t>(depth));
    for (int k = 0; k < depth; ++k) {
        util::Rng rng(seed, "mixing", static_cast<std::uint64_t>(k));
        std::vector<double> q;
        for (int attempt = 0; attempt < 64; ++attempt) {
            std::vector<double> a(static_cast<std::size_t>(n) * n);
            for (auto& v : a) v = rng.normal();
            q = util::qr_orthonormal(a, n);
            if (util::condition_number(q, n) <= kMaxMixingCondition) break;
            util::log_warn("mixing layer ", k, " resampled (ill conditioned draw)");
        }
        m.weights.push_back(std::move(q));
    }
    m.validate();
    return m;
}

std::vector<double> mix(const std::vector<double>& z, const MixingSpec& m) {
    if (static_cast<int>(z.size()) != m.n) throw ShapeError("mix: input length must equal n");
    std::vector<double> y = z;
    for (const auto& wmat : m.weights) {
        y = util::mat_vec(wmat, y, m.n);
        for (auto& v : y) v = v > 0.0 ? v : m.slope * v;
    }
    return y;
}

std::vector<double> unmix(const std::vector<double>& x, const MixingSpec& m) {
    if (static_cast<int>(x.size()) != m.n) throw ShapeError("unmix: input length must equal n");
    std::vector<double> y = x;
    for (auto it = m.weights.rbegin(); it != m.weights.rend(); ++it) {
        // leaky_relu is sign preserving, so the branch is recoverable from the output.
        for (auto& v : y) v = v > 0.0 ? v : v / m.slope;
        const auto f = util::lu_factor(*it, m.n);
        y = util::lu_solve(f, y);
    }
    return y;
}

} // namespace idol::scm
