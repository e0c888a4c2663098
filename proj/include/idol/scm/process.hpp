#pragma once

#include <cstdint>
#include <vector>

#include "idol/util/rng.hpp"

namespace idol::scm {

// Ground-truth latent dynamics. W couples each coordinate to the previous
// timestep, V couples it to lower-indexed coordinates of the same timestep.
// Both are row-indexed by effect and column-indexed by cause: W[i][j] != 0
// means z[t-1, j] influences z[t, i], and V[i][j] != 0 (j < i) means
// z[t, j] influences z[t, i] within the same timestep.
struct LatentProcessSpec {
    int n = 0;
    int lag = 1;
    int seq_len = 5;
    std::vector<double> w;  // n*n row major
    std::vector<double> v;  // n*n, strictly lower triangular
    double noise_std = 1.0;
    double slope = 0.2;

    double w_at(int i, int j) const { return w[static_cast<std::size_t>(i) * n + j]; }
    double v_at(int i, int j) const { return v[static_cast<std::size_t>(i) * n + j]; }

    // Throws ConfigError on any structural violation (sizes, triangularity,
    // slope range, lag).
    void validate() const;
};

// One transition of the latent process. Coordinates are evaluated in
// ascending order so each one sees the already-computed same-step values of
// its instantaneous parents:
//   u_i = leaky_relu(W[i,:] . z_prev) + V[i,<i] . z_new[<i]
//   z_new[i] = u_i * eps[i] + eps[i]
std::vector<double> step(const std::vector<double>& z_prev, const std::vector<double>& eps,
                         const LatentProcessSpec& spec);

} // namespace idol::scm
