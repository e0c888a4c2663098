#pragma once

#include <vector>

namespace idol::util {

// Small dense double precision helpers for the data generating side, where
// matrices never exceed 16x16. Row major, n x n unless stated otherwise.

// PA = LU factorization with partial pivoting. Throws NumericError when the
// matrix is singular to working precision.
struct LuFactors {
    int n = 0;
    std::vector<double> lu;  // packed L (unit diagonal implied) and U
    std::vector<int> perm;   // row permutation
    int sign = 1;
};

LuFactors lu_factor(const std::vector<double>& a, int n);
std::vector<double> lu_solve(const LuFactors& f, const std::vector<double>& b);
std::vector<double> lu_inverse(const LuFactors& f);

// Householder QR of a square matrix; returns Q with the sign convention that
// R has a nonnegative diagonal, so the result is unique given the input.
std::vector<double> qr_orthonormal(const std::vector<double>& a, int n);

// Spectral condition number estimate via power iteration on A^T A and on the
// inverse. Deterministic: the iteration starts from a fixed vector.
double condition_number(const std::vector<double>& a, int n);

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b, int n);
std::vector<double> mat_vec(const std::vector<double>& a, const std::vector<double>& x, int n);

} // namespace idol::util
