#include "idol/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "idol/util/errors.hpp"
#include "idol/util/log.hpp"

namespace idol::eval {

namespace {

std::vector<double> column(const diff::Tensor& m, int c) {
    std::vector<double> out(m.rows());
    for (int r = 0; r < m.rows(); ++r) out[r] = m.at(r, c);
    return out;
}

// Average ranks, ties sharing the mean of their positions.
std::vector<double> ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> out(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) out[idx[k]] = r;
        i = j + 1;
    }
    return out;
}

struct Centered {
    std::vector<double> values;
    double norm = 0.0; // sqrt of centered sum of squares
};

Centered center(const std::vector<double>& v) {
    Centered c;
    const double mean =
        std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    c.values.resize(v.size());
    double ss = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        c.values[i] = v[i] - mean;
        ss += c.values[i] * c.values[i];
    }
    c.norm = std::sqrt(ss);
    return c;
}

// Hungarian method on a cost matrix (minimizing), square n x n.
// Returns row assigned to each column.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_for_col(n);
    for (int j = 1; j <= n; ++j) row_for_col[j - 1] = p[j] - 1;
    return row_for_col;
}

// Best achievable total when some columns are already pinned to rows.
double best_total(const diff::Tensor& score, const std::vector<int>& pinned) {
    const int n = score.rows();
    std::vector<int> free_rows, free_cols;
    std::vector<char> row_used(n, 0);
    double fixed = 0.0;
    for (int k = 0; k < n; ++k) {
        if (pinned[k] >= 0) {
            fixed += score.at(pinned[k], k);
            row_used[pinned[k]] = 1;
        } else {
            free_cols.push_back(k);
        }
    }
    for (int r = 0; r < n; ++r)
        if (!row_used[r]) free_rows.push_back(r);
    if (free_cols.empty()) return fixed;
    const int m = static_cast<int>(free_cols.size());
    std::vector<std::vector<double>> cost(m, std::vector<double>(m));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            cost[a][b] = -score.at(free_rows[a], free_cols[b]);
    auto assign = hungarian(cost);
    double total = fixed;
    for (int b = 0; b < m; ++b) total += score.at(free_rows[assign[b]], free_cols[b]);
    return total;
}

} // namespace

diff::Tensor correlation_matrix(const diff::Tensor& z, const diff::Tensor& zhat,
                                CorrMethod method) {
    if (z.rank() != 2 || zhat.rank() != 2)
        throw ShapeError("correlation_matrix: expected matrices");
    if (z.rows() != zhat.rows())
        throw ShapeError("correlation_matrix: row counts differ: " +
                         std::to_string(z.rows()) + " vs " +
                         std::to_string(zhat.rows()));
    if (z.rows() < 3)
        throw DataError("correlation_matrix: need at least 3 rows");

    const int n = z.cols();
    const int m = zhat.cols();
    std::vector<Centered> zc(n), hc(m);
    int constant_cols = 0;
    for (int i = 0; i < n; ++i) {
        auto col = column(z, i);
        if (method == CorrMethod::kSpearman) col = ranks(col);
        zc[i] = center(col);
        if (zc[i].norm == 0.0) ++constant_cols;
    }
    for (int k = 0; k < m; ++k) {
        auto col = column(zhat, k);
        if (method == CorrMethod::kSpearman) col = ranks(col);
        hc[k] = center(col);
        if (hc[k].norm == 0.0) ++constant_cols;
    }
    if (constant_cols > 0)
        util::log_warn("correlation_matrix: ", constant_cols,
                       " constant columns, their correlations are set to 0");

    diff::Tensor out = diff::Tensor::zeros({n, m});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < m; ++k) {
            if (zc[i].norm == 0.0 || hc[k].norm == 0.0) continue;
            double dot = 0.0;
            for (size_t r = 0; r < zc[i].values.size(); ++r)
                dot += zc[i].values[r] * hc[k].values[r];
            out.at(i, k) = std::min(1.0, std::abs(dot / (zc[i].norm * hc[k].norm)));
        }
    return out;
}

Assignment optimal_assignment(const diff::Tensor& score) {
    if (score.rank() != 2 || score.rows() != score.cols())
        throw ShapeError("optimal_assignment: expected a square matrix");
    const int n = score.rows();
    if (n == 0) throw ShapeError("optimal_assignment: empty matrix");

    std::vector<int> pinned(n, -1);
    const double target = best_total(score, pinned);
    const double eps = 1e-11 * std::max(1.0, std::abs(target));

    // Fix columns left to right, choosing the smallest true index that still
    // permits an optimal completion; this realizes the lexicographic tie rule.
    std::vector<char> row_used(n, 0);
    for (int k = 0; k < n; ++k) {
        for (int r = 0; r < n; ++r) {
            if (row_used[r]) continue;
            pinned[k] = r;
            if (best_total(score, pinned) >= target - eps) {
                row_used[r] = 1;
                break;
            }
            pinned[k] = -1;
        }
        if (pinned[k] < 0)
            throw NumericError("optimal_assignment: no consistent completion");
    }
    Assignment a;
    a.perm = pinned;
    a.total = 0.0;
    for (int k = 0; k < n; ++k) a.total += score.at(pinned[k], k);
    return a;
}

double mcc(const diff::Tensor& z, const diff::Tensor& zhat, CorrMethod method) {
    if (z.cols() != zhat.cols())
        throw ShapeError("mcc: column counts differ");
    diff::Tensor corr = correlation_matrix(z, zhat, method);
    Assignment a = optimal_assignment(corr);
    return a.total / static_cast<double>(z.cols());
}

diff::Tensor align_matrix(const diff::Tensor& m, const std::vector<int>& perm) {
    const int n = m.rows();
    if (m.rank() != 2 || m.cols() != n)
        throw ShapeError("align_matrix: expected a square matrix");
    if (static_cast<int>(perm.size()) != n)
        throw ShapeError("align_matrix: permutation size mismatch");
    std::vector<int> inv(n, -1);
    for (int k = 0; k < n; ++k) {
        if (perm[k] < 0 || perm[k] >= n || inv[perm[k]] != -1)
            throw ContractError("align_matrix: perm is not a bijection");
        inv[perm[k]] = k;
    }
    diff::Tensor out = diff::Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = m.at(inv[i], inv[j]);
    return out;
}

std::string metrics_json(const Metrics& m, double threshold, std::uint64_t seed,
                         const std::string& config_hash) {
    nlohmann::json doc;
    doc["mcc"] = m.mcc;
    doc["f1_delayed"] = m.f1_delayed;
    doc["f1_inst"] = m.f1_inst;
    doc["shd"] = m.shd;
    doc["threshold"] = threshold;
    doc["seed"] = seed;
    doc["config_hash"] = config_hash;
    return doc.dump(2) + "\n";
}

} // namespace idol::eval
