#include "idol/scm/graphs.hpp"

#include <algorithm>
#include <sstream>

#include "idol/util/errors.hpp"

namespace idol::scm {

void Dag::add_edge(int from, int to) {
    if (from < 0 || from >= num_nodes || to < 0 || to >= num_nodes) {
        throw ContractError("dag edge endpoint out of range");
    }
    parents[static_cast<std::size_t>(to)].push_back(from);
}

std::vector<std::vector<int>> Dag::children() const {
    std::vector<std::vector<int>> ch(static_cast<std::size_t>(num_nodes));
    for (int v = 0; v < num_nodes; ++v) {
        for (int p : parents[static_cast<std::size_t>(v)]) {
            ch[static_cast<std::size_t>(p)].push_back(v);
        }
    }
    return ch;
}

void UndirectedGraph::add_edge(int a, int b) {
    if (a < 0 || a >= num_nodes || b < 0 || b >= num_nodes) {
        throw ContractError("undirected edge endpoint out of range");
    }
    if (a == b) return;  // no self loops
    adj[static_cast<std::size_t>(a) * num_nodes + b] = true;
    adj[static_cast<std::size_t>(b) * num_nodes + a] = true;
}

bool UndirectedGraph::has_edge(int a, int b) const {
    return adj[static_cast<std::size_t>(a) * num_nodes + b];
}

std::vector<int> UndirectedGraph::neighbors(int v) const {
    if (v < 0 || v >= num_nodes) throw ContractError("neighbors: node out of range");
    std::vector<int> out;
    for (int u = 0; u < num_nodes; ++u) {
        if (has_edge(v, u)) out.push_back(u);
    }
    return out;
}

int UndirectedGraph::edge_count() const {
    int c = 0;
    for (int a = 0; a < num_nodes; ++a)
        for (int b = a + 1; b < num_nodes; ++b) c += has_edge(a, b) ? 1 : 0;
    return c;
}

GroundTruthGraph GroundTruthGraph::from_spec(const LatentProcessSpec& spec) {
    spec.validate();
    GroundTruthGraph g;
    g.n = spec.n;
    g.delayed.resize(static_cast<std::size_t>(spec.n) * spec.n);
    g.inst.resize(static_cast<std::size_t>(spec.n) * spec.n);
    for (int i = 0; i < spec.n; ++i)
        for (int j = 0; j < spec.n; ++j) {
            g.delayed[static_cast<std::size_t>(i) * spec.n + j] = spec.w_at(i, j) != 0.0;
            g.inst[static_cast<std::size_t>(i) * spec.n + j] = spec.v_at(i, j) != 0.0;
        }
    return g;
}

Dag unroll_window(const GroundTruthGraph& g, int timestamps) {
    if (timestamps < 1) throw ContractError("unroll_window: need at least one timestamp");
    Dag dag(timestamps * g.n);
    for (int t = 0; t < timestamps; ++t) {
        for (int i = 0; i < g.n; ++i) {
            for (int j = 0; j < i; ++j) {
                if (g.inst_at(i, j)) dag.add_edge(t * g.n + j, t * g.n + i);
            }
            if (t > 0) {
                for (int j = 0; j < g.n; ++j) {
                    if (g.delayed_at(i, j)) dag.add_edge((t - 1) * g.n + j, t * g.n + i);
                }
            }
        }
    }
    return dag;
}

std::string window_node_label(int v, int timestamps, int n) {
    const int t = v / n;
    const int i = v % n;
    const int offset = t - (timestamps - 1);
    std::ostringstream os;
    if (offset == 0) {
        os << "z[t," << (i + 1) << "]";
    } else {
        os << "z[t" << offset << "," << (i + 1) << "]";
    }
    return os.str();
}

UndirectedGraph moralize(const Dag& dag) {
    UndirectedGraph g(dag.num_nodes);
    for (int v = 0; v < dag.num_nodes; ++v) {
        const auto& ps = dag.parents[static_cast<std::size_t>(v)];
        for (int p : ps) g.add_edge(p, v);
        for (std::size_t a = 0; a < ps.size(); ++a)
            for (std::size_t b = a + 1; b < ps.size(); ++b) g.add_edge(ps[a], ps[b]);
    }
    return g;
}

MarkovNet moral_graph(const GroundTruthGraph& g, int timestamps) {
    MarkovNet m;
    m.timestamps = timestamps;
    m.n = g.n;
    m.graph = moralize(unroll_window(g, timestamps));
    return m;
}

std::vector<int> intimate_set(const UndirectedGraph& g, int v) {
    if (v < 0 || v >= g.num_nodes) {
        throw ContractError("intimate_set: node " + std::to_string(v) + " not in graph");
    }
    const std::vector<int> nbrs = g.neighbors(v);
    std::vector<int> out;
    for (int u : nbrs) {
        bool intimate = true;
        for (int w : nbrs) {
            if (w == u) continue;
            if (!g.has_edge(u, w)) {
                intimate = false;
                break;
            }
        }
        if (intimate) out.push_back(u);
    }
    return out;
}

SparsityReport check_sparse_process(const GroundTruthGraph& g, const MarkovNet& m, int t_index) {
    if (m.n != g.n) throw ContractError("check_sparse_process: graph dimensions disagree");
    if (t_index < 0) {
        t_index = m.timestamps == 1 ? 0 : (m.timestamps == 2 ? 1 : m.timestamps / 2);
    }
    if (t_index >= m.timestamps) {
        throw ContractError("check_sparse_process: t_index outside the window");
    }
    SparsityReport report;
    report.t_index = t_index;
    report.per_node.resize(static_cast<std::size_t>(g.n));
    report.satisfied = true;
    for (int i = 0; i < g.n; ++i) {
        const int node = m.index(t_index, i);
        if (intimate_set(m.graph, node).empty()) {
            report.per_node[static_cast<std::size_t>(i)] = SparsityCase::kEmptySet;
            continue;
        }
        // Direct children of (t_index, i) inside the window.
        bool child_ok = false;
        for (int k = 0; k < g.n && !child_ok; ++k) {
            if (g.inst_at(k, i) && intimate_set(m.graph, m.index(t_index, k)).empty()) {
                child_ok = true;
            }
        }
        if (t_index + 1 < m.timestamps) {
            for (int k = 0; k < g.n && !child_ok; ++k) {
                if (g.delayed_at(k, i) && intimate_set(m.graph, m.index(t_index + 1, k)).empty()) {
                    child_ok = true;
                }
            }
        }
        report.per_node[static_cast<std::size_t>(i)] =
            child_ok ? SparsityCase::kChildEmptySet : SparsityCase::kViolated;
        if (!child_ok) report.satisfied = false;
    }
    return report;
}

std::string SparsityReport::to_string(const MarkovNet& m) const {
    std::ostringstream os;
    os << "structural sparsity at timestamp index " << t_index << ":\n";
    for (std::size_t i = 0; i < per_node.size(); ++i) {
        os << "  " << m.label(m.index(t_index, static_cast<int>(i))) << ": ";
        switch (per_node[i]) {
            case SparsityCase::kEmptySet: os << "empty intimate set"; break;
            case SparsityCase::kChildEmptySet: os << "a direct child has an empty intimate set"; break;
            case SparsityCase::kViolated: os << "violated"; break;
        }
        os << "\n";
    }
    os << "overall: " << (satisfied ? "satisfied" : "violated") << "\n";
    return os.str();
}

std::string ground_truth_dot(const GroundTruthGraph& g) {
    std::ostringstream os;
    os << "digraph latent_process {\n  rankdir=LR;\n";
    for (int i = 0; i < g.n; ++i) {
        os << "  \"z[t-1," << (i + 1) << "]\";\n";
        os << "  \"z[t," << (i + 1) << "]\";\n";
    }
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            if (g.delayed_at(i, j)) {
                os << "  \"z[t-1," << (j + 1) << "]\" -> \"z[t," << (i + 1) << "]\";\n";
            }
        }
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            if (g.inst_at(i, j)) {
                os << "  \"z[t," << (j + 1) << "]\" -> \"z[t," << (i + 1) << "]\";\n";
            }
        }
    os << "}\n";
    return os.str();
}

} // namespace idol::scm
