#include "idol/eval/graph_recover.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>

#include "idol/util/errors.hpp"
#include "idol/util/linalg.hpp"
#include "idol/util/log.hpp"

namespace idol::eval {

namespace {

double matrix_max(const diff::Tensor& m) {
    double best = 0.0;
    for (const double v : m.data()) best = std::max(best, v);
    return best;
}

// Enumerates subsets of candidates by ascending size, lexicographic within a
// size, and returns the first one the oracle accepts as separating.
std::optional<std::vector<int>> first_sepset(const CiOracle& ci, int a, int b,
                                             const std::vector<int>& candidates,
                                             int max_size) {
    const int m = static_cast<int>(candidates.size());
    const int cap = std::min(max_size, m);
    for (int size = 0; size <= cap; ++size) {
        std::vector<int> pick(size);
        for (int i = 0; i < size; ++i) pick[i] = i;
        while (true) {
            std::vector<int> cond(size);
            for (int i = 0; i < size; ++i) cond[i] = candidates[pick[i]];
            if (ci(a, b, cond)) return cond;
            int i = size - 1;
            while (i >= 0 && pick[i] == m - size + i) --i;
            if (i < 0) break;
            ++pick[i];
            for (int j = i + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
        }
    }
    return std::nullopt;
}

struct Vote {
    int from = -1, to = -1; // proposed orientation from -> to
    bool collider = false;
};

// Signed Pearson correlation of the columns of one matrix.
diff::Tensor correlation_signed(const diff::Tensor& m) {
    const int rows = m.rows();
    const int q = m.cols();
    std::vector<std::vector<double>> centered(q, std::vector<double>(rows));
    std::vector<double> norms(q);
    for (int c = 0; c < q; ++c) {
        double mean = 0.0;
        for (int r = 0; r < rows; ++r) mean += m.at(r, c);
        mean /= rows;
        double ss = 0.0;
        for (int r = 0; r < rows; ++r) {
            centered[c][r] = m.at(r, c) - mean;
            ss += centered[c][r] * centered[c][r];
        }
        norms[c] = std::sqrt(ss);
        if (norms[c] == 0.0)
            throw NumericError("partial_corr_ci: constant column");
    }
    diff::Tensor out = diff::Tensor::zeros({q, q});
    for (int i = 0; i < q; ++i) {
        out.at(i, i) = 1.0;
        for (int j = i + 1; j < q; ++j) {
            double dot = 0.0;
            for (int r = 0; r < rows; ++r) dot += centered[i][r] * centered[j][r];
            const double v = dot / (norms[i] * norms[j]);
            out.at(i, j) = v;
            out.at(j, i) = v;
        }
    }
    return out;
}

} // namespace

GraphEstimate threshold_graph(const diff::Tensor& jd_bar,
                              const diff::Tensor& je_bar, double tau_rel) {
    if (jd_bar.rank() != 2 || jd_bar.rows() != jd_bar.cols() ||
        je_bar.rank() != 2 || je_bar.rows() != jd_bar.rows() ||
        je_bar.cols() != jd_bar.rows())
        throw ShapeError("threshold_graph: expected matching square matrices");
    if (!(tau_rel >= 0.0 && tau_rel <= 1.0))
        throw ConfigError("threshold_graph: tau_rel must lie in [0, 1]");
    for (const double v : jd_bar.data())
        if (v < 0.0) throw ContractError("threshold_graph: negative magnitude");
    for (const double v : je_bar.data())
        if (v < 0.0) throw ContractError("threshold_graph: negative magnitude");

    const int n = jd_bar.rows();
    GraphEstimate est(n);
    est.tau_rel = tau_rel;
    const double max_d = matrix_max(jd_bar);
    const double max_e = matrix_max(je_bar);
    est.cut_delayed = tau_rel * max_d;
    est.cut_inst = tau_rel * max_e;
    if (max_d > 0.0) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (jd_bar.at(i, j) >= est.cut_delayed)
                    est.delayed[static_cast<std::size_t>(i) * n + j] = true;
    }
    if (max_e > 0.0) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                if (je_bar.at(i, j) >= est.cut_inst) {
                    est.inst_skeleton[static_cast<std::size_t>(i) * n + j] = true;
                    est.inst_skeleton[static_cast<std::size_t>(j) * n + i] = true;
                }
            }
    }
    return est;
}

bool dsep(const scm::Dag& dag, int a, int b, const std::vector<int>& cond) {
    const int n = dag.num_nodes;
    auto check = [&](int v, const char* what) {
        if (v < 0 || v >= n)
            throw ContractError(std::string("dsep: ") + what + " out of range");
    };
    check(a, "endpoint");
    check(b, "endpoint");
    if (a == b) throw ContractError("dsep: endpoints coincide");
    std::vector<char> in_cond(n, 0);
    for (int s : cond) {
        check(s, "conditioning node");
        if (s == a || s == b)
            throw ContractError("dsep: endpoint inside the conditioning set");
        in_cond[s] = 1;
    }

    // Ancestor closure of {a, b} and the conditioning set.
    std::vector<char> anc(n, 0);
    std::deque<int> queue = {a, b};
    for (int s : cond) queue.push_back(s);
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        if (anc[v]) continue;
        anc[v] = 1;
        for (int p : dag.parents[v]) queue.push_back(p);
    }

    scm::Dag induced(n);
    for (int v = 0; v < n; ++v) {
        if (!anc[v]) continue;
        for (int p : dag.parents[v]) induced.add_edge(p, v);
    }
    scm::UndirectedGraph moral = scm::moralize(induced);

    std::vector<char> seen(n, 0);
    std::deque<int> bfs = {a};
    seen[a] = 1;
    while (!bfs.empty()) {
        const int v = bfs.front();
        bfs.pop_front();
        if (v == b) return false;
        for (int w : moral.neighbors(v)) {
            if (seen[w] || in_cond[w] || !anc[w]) continue;
            seen[w] = 1;
            bfs.push_back(w);
        }
    }
    return true;
}

CiOracle exact_ci_oracle(const scm::GroundTruthGraph& truth) {
    scm::Dag window = scm::unroll_window(truth, 2);
    return [window](int a, int b, const std::vector<int>& cond) {
        return dsep(window, a, b, cond);
    };
}

bool partial_corr_ci(const diff::Tensor& samples, int a, int b,
                     const std::vector<int>& cond, double alpha_level) {
    if (samples.rank() != 2) throw ShapeError("partial_corr_ci: expected a matrix");
    const int m = samples.rows();
    const int d = samples.cols();
    auto check = [&](int v) {
        if (v < 0 || v >= d)
            throw ContractError("partial_corr_ci: column out of range");
    };
    check(a);
    check(b);
    for (int s : cond) check(s);
    const int k = static_cast<int>(cond.size());
    if (m - k - 3 < 1)
        throw DataError("partial_corr_ci: needs more than " +
                        std::to_string(k + 3) + " samples");

    std::vector<int> cols = {a, b};
    cols.insert(cols.end(), cond.begin(), cond.end());
    const int q = static_cast<int>(cols.size());
    diff::Tensor sub = diff::Tensor::zeros({m, q});
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < q; ++c) sub.at(r, c) = samples.at(r, cols[c]);

    double r_ab;
    try {
        diff::Tensor corr = correlation_signed(sub);
        std::vector<double> flat(corr.data().begin(), corr.data().end());
        auto inv = util::lu_inverse(util::lu_factor(flat, q));
        r_ab = -inv[1] / std::sqrt(inv[0] * inv[q + 1]);
    } catch (const NumericError&) {
        util::log_warn("partial_corr_ci: singular correlation matrix, "
                       "treating columns as dependent");
        return false;
    }
    r_ab = std::clamp(r_ab, -1.0 + 1e-12, 1.0 - 1e-12);
    const double z = 0.5 * std::log((1.0 + r_ab) / (1.0 - r_ab));
    const double stat = std::sqrt(static_cast<double>(m - k - 3)) * std::abs(z);
    const double p = std::erfc(stat / std::sqrt(2.0));
    return p > alpha_level;
}

CiOracle data_ci_oracle(const diff::Tensor& samples, double alpha_level) {
    return [samples, alpha_level](int a, int b, const std::vector<int>& cond) {
        return partial_corr_ci(samples, a, b, cond, alpha_level);
    };
}

GraphEstimate orient(const GraphEstimate& est, const CiOracle& ci,
                     const OrientOptions& opt) {
    const int n = est.n;
    GraphEstimate out = est;
    auto idx = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };

    // Window adjacency for shielding tests: previous nodes 0..n-1, current
    // nodes n..2n-1.
    auto adjacent = [&](int u, int v) {
        const bool up = u < n, vp = v < n;
        if (up && vp) return false; // previous-slice edges never queried
        if (!up && !vp) return out.skeleton_at(u - n, v - n);
        const int p = up ? u : v;
        const int c = up ? v - n : u - n;
        return out.delayed_at(c, p);
    };

    std::vector<int> all_nodes(2 * n);
    for (int v = 0; v < 2 * n; ++v) all_nodes[v] = v;

    // Anchor-driven votes for every still-unoriented skeleton edge.
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            if (!out.skeleton_at(a, b)) continue;
            if (out.oriented_at(a, b) || out.oriented_at(b, a)) continue;
            std::vector<Vote> votes;
            bool vote_failed = false;
            // mid - far runs over both roles of the edge.
            const int roles[2][2] = {{a, b}, {b, a}};
            for (const auto& role : roles) {
                const int mid = role[0], far = role[1];
                for (int p = 0; p < n; ++p) {
                    if (!out.delayed_at(mid, p)) continue; // anchor -> mid
                    if (adjacent(p, n + far)) continue;    // shielded
                    std::vector<int> candidates;
                    for (int v : all_nodes)
                        if (v != p && v != n + far) candidates.push_back(v);
                    auto sep = first_sepset(ci, p, n + far, candidates,
                                            opt.max_sepset);
                    if (!sep) {
                        out.notes.push_back(
                            "no separating set for anchor pair (" +
                            std::to_string(p) + ", " + std::to_string(far) +
                            ") within size cap");
                        vote_failed = true;
                        continue;
                    }
                    const bool mid_in =
                        std::find(sep->begin(), sep->end(), n + mid) != sep->end();
                    Vote v;
                    if (mid_in) { // chain: anchor -> mid -> far
                        v.from = mid;
                        v.to = far;
                        v.collider = false;
                    } else { // collider: mid <- far
                        v.from = far;
                        v.to = mid;
                        v.collider = true;
                    }
                    votes.push_back(v);
                }
            }
            (void)vote_failed;
            if (votes.empty()) continue;
            bool conflict = false;
            for (const auto& v : votes)
                if (v.from != votes[0].from) conflict = true;
            if (conflict) {
                out.notes.push_back("contradictory orientation evidence for "
                                    "edge (" + std::to_string(a) + ", " +
                                    std::to_string(b) + "), left unoriented");
                continue;
            }
            bool any_collider = false;
            for (const auto& v : votes) any_collider |= v.collider;
            out.inst_oriented[idx(votes[0].from, votes[0].to)] = true;
            out.rule[idx(votes[0].from, votes[0].to)] =
                any_collider ? EdgeRule::kVStructure : EdgeRule::kChain;
        }
    }

    // Chain propagation to fixpoint.
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (!out.oriented_at(i, j)) continue;
                for (int k = 0; k < n; ++k) {
                    if (k == i || k == j) continue;
                    // i -> j - k with i, k nonadjacent: j -> k.
                    if (out.skeleton_at(j, k) && !out.oriented_at(j, k) &&
                        !out.oriented_at(k, j) && !out.skeleton_at(i, k)) {
                        out.inst_oriented[idx(j, k)] = true;
                        out.rule[idx(j, k)] = EdgeRule::kChain;
                        changed = true;
                    }
                    // i -> j -> k with i - k undirected: i -> k.
                    if (out.oriented_at(j, k) && out.skeleton_at(i, k) &&
                        !out.oriented_at(i, k) && !out.oriented_at(k, i)) {
                        out.inst_oriented[idx(i, k)] = true;
                        out.rule[idx(i, k)] = EdgeRule::kChain;
                        changed = true;
                    }
                }
            }
    }

    // Every orientation must sit on a skeleton edge and the directed part
    // must stay acyclic.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (out.oriented_at(i, j) && !out.skeleton_at(i, j))
                throw ContractError("orient: edge outside the skeleton");
    std::vector<int> color(n, 0);
    std::function<void(int)> visit = [&](int v) {
        color[v] = 1;
        for (int w = 0; w < n; ++w) {
            if (!out.oriented_at(v, w)) continue;
            if (color[w] == 1)
                throw ContractError("orient: orientation produced a cycle");
            if (color[w] == 0) visit(w);
        }
        color[v] = 2;
    };
    for (int v = 0; v < n; ++v)
        if (color[v] == 0) visit(v);
    return out;
}

Metrics graph_metrics(const GraphEstimate& est, const scm::GroundTruthGraph& truth) {
    if (est.n != truth.n)
        throw ShapeError("graph_metrics: dimension mismatch");
    const int n = est.n;
    Metrics m;
    int tp_d = 0, fp_d = 0, fn_d = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const bool e = est.delayed_at(i, j);
            const bool t = truth.delayed_at(i, j);
            tp_d += e && t;
            fp_d += e && !t;
            fn_d += !e && t;
        }
    int tp_i = 0, fp_i = 0, fn_i = 0, wrong_dir = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const bool e = est.skeleton_at(i, j);
            const bool t = truth.inst_at(i, j) || truth.inst_at(j, i);
            tp_i += e && t;
            fp_i += e && !t;
            fn_i += !e && t;
            if (e && t) {
                // Instantaneous truth is strictly lower triangular: the true
                // direction runs from the smaller to the larger index.
                const int cause = truth.inst_at(j, i) ? i : j;
                const int effect = cause == i ? j : i;
                if (est.oriented_at(effect, cause)) ++wrong_dir;
            }
        }
    auto f1 = [](int tp, int fp, int fn) {
        if (tp + fp + fn == 0) return 1.0;
        return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    };
    m.f1_delayed = f1(tp_d, fp_d, fn_d);
    m.f1_inst = f1(tp_i, fp_i, fn_i);
    m.shd = fp_d + fn_d + fp_i + fn_i + wrong_dir;
    return m;
}

std::string graph_estimate_dot(const GraphEstimate& est) {
    const int n = est.n;
    std::string s = "digraph estimate {\n  rankdir=LR;\n";
    for (int i = 0; i < n; ++i)
        s += "  p" + std::to_string(i) + " [label=\"z[t-1," +
             std::to_string(i + 1) + "]\"];\n";
    for (int i = 0; i < n; ++i)
        s += "  c" + std::to_string(i) + " [label=\"z[t," +
             std::to_string(i + 1) + "]\"];\n";
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (est.delayed_at(i, j))
                s += "  p" + std::to_string(j) + " -> c" + std::to_string(i) +
                     ";\n";
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i < j && est.skeleton_at(i, j) && !est.oriented_at(i, j) &&
                !est.oriented_at(j, i))
                s += "  c" + std::to_string(i) + " -> c" + std::to_string(j) +
                     " [dir=none, rule=none];\n";
            if (est.oriented_at(i, j))
                s += "  c" + std::to_string(i) + " -> c" + std::to_string(j) +
                     " [rule=" +
                     (est.rule_at(i, j) == EdgeRule::kVStructure ? "v"
                                                                 : "chain") +
                     "];\n";
        }
    s += "}\n";
    return s;
}

} // namespace idol::eval
