#include "idol/scm/process.hpp"

#include <string>

#include "idol/util/errors.hpp"

namespace idol::scm {

void LatentProcessSpec::validate() const {
    if (n < 1) throw ConfigError("process spec: n must be at least 1");
    if (lag != 1) throw ConfigError("process spec: only lag 1 is supported");
    if (seq_len < 2) throw ConfigError("process spec: seq_len must be at least 2");
    const auto want = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    if (w.size() != want || v.size() != want) {
        throw ConfigError("process spec: W and V must both be n x n");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            if (v_at(i, j) != 0.0) {
                throw ConfigError("process spec: V must be strictly lower triangular, V[" +
                                  std::to_string(i) + "][" + std::to_string(j) + "] = " +
                                  std::to_string(v_at(i, j)));
            }
        }
    }
    if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("process spec: slope must be in (0, 1)");
    if (!(noise_std > 0.0)) throw ConfigError("process spec: noise std must be positive");
}

std::vector<double> step(const std::vector<double>& z_prev, const std::vector<double>& eps,
                         const LatentProcessSpec& spec) {
    const int n = spec.n;
    if (static_cast<int>(z_prev.size()) != n || static_cast<int>(eps.size()) != n) {
        throw ShapeError("step: z_prev and eps must both have length n");
    }
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) {
        double u = 0.0;
        for (int j = 0; j < n; ++j) u += spec.w_at(i, j) * z_prev[j];
        u = u > 0.0 ? u : spec.slope * u;
        for (int j = 0; j < i; ++j) u += spec.v_at(i, j) * z[j];
        z[i] = u * eps[i] + eps[i];
    }
    return z;
}

} // namespace idol::scm
