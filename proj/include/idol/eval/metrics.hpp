#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idol/diff/tensor.hpp"

namespace idol::eval {

enum class CorrMethod { kPearson, kSpearman };

// Absolute correlation between every pair of columns: entry (i, k) is
// |corr| of z column i with zhat column k. A constant column correlates 0
// with everything and logs a warning.
diff::Tensor correlation_matrix(const diff::Tensor& z, const diff::Tensor& zhat,
                                CorrMethod method);

struct Assignment {
    std::vector<int> perm; // estimated column -> matched true column
    double total = 0.0;
};

// Maximum-total matching of estimated to true columns. Ties are broken by
// the lexicographically smallest perm vector.
Assignment optimal_assignment(const diff::Tensor& score);

// Mean of the matched absolute correlations.
double mcc(const diff::Tensor& z, const diff::Tensor& zhat, CorrMethod method);

// Reindexes a square matrix from estimated to true coordinate order, where
// perm[k] names the true index matched to estimated index k.
diff::Tensor align_matrix(const diff::Tensor& m, const std::vector<int>& perm);

struct Metrics {
    double mcc = 0.0;
    double f1_delayed = 0.0;
    double f1_inst = 0.0;
    int shd = 0;
};

std::string metrics_json(const Metrics& m, double threshold, std::uint64_t seed,
                         const std::string& config_hash);

} // namespace idol::eval
