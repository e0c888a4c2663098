#pragma once

#include <cstdint>
#include <vector>

namespace idol::scm {

// Invertible observation map: depth stacked layers of leaky_relu(W_k . y).
// The activation is applied after every layer including the last. Square
// weights keep the map exactly invertible (leaky inverse then linear solve).
struct MixingSpec {
    int n = 0;
    int depth = 2;
    double slope = 0.2;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> weights;  // depth matrices, each n*n

    void validate() const;  // checks shapes and condition numbers
};

// Random orthogonal layers drawn from a labeled stream of the seed; resamples
// any layer whose condition number exceeds the bound (orthogonal draws pass
// on the first try, the loop guards future non-orthogonal variants).
MixingSpec make_random_mixing(int n, int depth, std::uint64_t seed, double slope = 0.2);

std::vector<double> mix(const std::vector<double>& z, const MixingSpec& m);
std::vector<double> unmix(const std::vector<double>& x, const MixingSpec& m);

inline constexpr double kMaxMixingCondition = 100.0;

} // namespace idol::scm
