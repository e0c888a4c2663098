#include "idol/util/linalg.hpp"

#include <cmath>
#include <cstdlib>

#include "idol/util/errors.hpp"

namespace idol::util {

LuFactors lu_factor(const std::vector<double>& a, int n) {
    if (static_cast<int>(a.size()) != n * n) {
        throw ShapeError("lu_factor: matrix size does not match n");
    }
    LuFactors f;
    f.n = n;
    f.lu = a;
    f.perm.resize(n);
    for (int i = 0; i < n; ++i) f.perm[i] = i;
    for (int k = 0; k < n; ++k) {
        int pivot = k;
        double best = std::abs(f.lu[k * n + k]);
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(f.lu[i * n + k]);
            if (v > best) {
                best = v;
                pivot = i;
            }
        }
        if (best < 1e-14) throw NumericError("lu_factor: matrix is singular to working precision");
        if (pivot != k) {
            for (int j = 0; j < n; ++j) std::swap(f.lu[k * n + j], f.lu[pivot * n + j]);
            std::swap(f.perm[k], f.perm[pivot]);
            f.sign = -f.sign;
        }
        for (int i = k + 1; i < n; ++i) {
            f.lu[i * n + k] /= f.lu[k * n + k];
            const double m = f.lu[i * n + k];
            for (int j = k + 1; j < n; ++j) f.lu[i * n + j] -= m * f.lu[k * n + j];
        }
    }
    return f;
}

std::vector<double> lu_solve(const LuFactors& f, const std::vector<double>& b) {
    const int n = f.n;
    if (static_cast<int>(b.size()) != n) throw ShapeError("lu_solve: rhs size mismatch");
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (int i = 1; i < n; ++i) {
        double s = x[i];
        for (int j = 0; j < i; ++j) s -= f.lu[i * n + j] * x[j];
        x[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int j = i + 1; j < n; ++j) s -= f.lu[i * n + j] * x[j];
        x[i] = s / f.lu[i * n + i];
    }
    return x;
}

std::vector<double> lu_inverse(const LuFactors& f) {
    const int n = f.n;
    std::vector<double> inv(n * n);
    std::vector<double> e(n, 0.0);
    for (int c = 0; c < n; ++c) {
        e.assign(n, 0.0);
        e[c] = 1.0;
        const std::vector<double> col = lu_solve(f, e);
        for (int r = 0; r < n; ++r) inv[r * n + c] = col[r];
    }
    return inv;
}

std::vector<double> qr_orthonormal(const std::vector<double>& a, int n) {
    if (static_cast<int>(a.size()) != n * n) {
        throw ShapeError("qr_orthonormal: matrix size does not match n");
    }
    std::vector<double> r = a;
    std::vector<double> q(n * n, 0.0);
    for (int i = 0; i < n; ++i) q[i * n + i] = 1.0;
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) {
        double norm = 0.0;
        for (int i = k; i < n; ++i) norm += r[i * n + k] * r[i * n + k];
        norm = std::sqrt(norm);
        if (norm < 1e-14) throw NumericError("qr_orthonormal: rank deficient input");
        const double alpha = r[k * n + k] >= 0 ? -norm : norm;
        double vnorm2 = 0.0;
        for (int i = k; i < n; ++i) {
            v[i] = r[i * n + k] - (i == k ? alpha : 0.0);
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 < 1e-28) continue;
        // Apply the reflector H = I - 2 v v^T / (v^T v) to R and accumulate in Q.
        for (int j = k; j < n; ++j) {
            double dot = 0.0;
            for (int i = k; i < n; ++i) dot += v[i] * r[i * n + j];
            const double s = 2.0 * dot / vnorm2;
            for (int i = k; i < n; ++i) r[i * n + j] -= s * v[i];
        }
        for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int i = k; i < n; ++i) dot += v[i] * q[j * n + i];
            const double s = 2.0 * dot / vnorm2;
            for (int i = k; i < n; ++i) q[j * n + i] -= s * v[i];
        }
    }
    // Fix signs so R's diagonal is nonnegative, making Q unique.
    for (int k = 0; k < n; ++k) {
        if (r[k * n + k] < 0.0) {
            for (int i = 0; i < n; ++i) q[i * n + k] = -q[i * n + k];
        }
    }
    return q;
}

namespace {

double power_norm2(const std::vector<double>& a, int n) {
    // Largest singular value of a via power iteration on A^T A.
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = 1.0 / std::sqrt(static_cast<double>(n)) + 1e-3 * (i + 1);
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        std::vector<double> ax(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) ax[i] += a[i * n + j] * x[j];
        std::vector<double> atax(n, 0.0);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) atax[j] += a[i * n + j] * ax[i];
        double norm = 0.0;
        for (int i = 0; i < n; ++i) norm += atax[i] * atax[i];
        norm = std::sqrt(norm);
        if (norm < 1e-300) return 0.0;
        for (int i = 0; i < n; ++i) x[i] = atax[i] / norm;
        lambda = norm;
    }
    return std::sqrt(lambda);
}

} // namespace

double condition_number(const std::vector<double>& a, int n) {
    const double smax = power_norm2(a, n);
    const LuFactors f = lu_factor(a, n);
    const std::vector<double> inv = lu_inverse(f);
    const double smin_inv = power_norm2(inv, n);
    return smax * smin_inv;
}

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b, int n) {
    std::vector<double> c(n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const double av = a[i * n + k];
            for (int j = 0; j < n; ++j) c[i * n + j] += av * b[k * n + j];
        }
    return c;
}

std::vector<double> mat_vec(const std::vector<double>& a, const std::vector<double>& x, int n) {
    std::vector<double> y(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) y[i] += a[i * n + j] * x[j];
    return y;
}

} // namespace idol::util
