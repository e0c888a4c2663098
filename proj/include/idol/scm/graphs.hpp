#pragma once

#include <string>
#include <vector>

#include "idol/scm/process.hpp"

namespace idol::scm {

// Directed acyclic graph in parent-list form; nodes are dense indices.
struct Dag {
    int num_nodes = 0;
    std::vector<std::vector<int>> parents;

    explicit Dag(int nodes = 0) : num_nodes(nodes), parents(static_cast<std::size_t>(nodes)) {}
    void add_edge(int from, int to);
    std::vector<std::vector<int>> children() const;
};

struct UndirectedGraph {
    int num_nodes = 0;
    std::vector<bool> adj;  // square, symmetric, zero diagonal

    explicit UndirectedGraph(int nodes = 0)
        : num_nodes(nodes), adj(static_cast<std::size_t>(nodes) * nodes, false) {}
    void add_edge(int a, int b);
    bool has_edge(int a, int b) const;
    std::vector<int> neighbors(int v) const;
    int edge_count() const;
};

// Supports of W (time delayed) and V (instantaneous), row = effect.
struct GroundTruthGraph {
    int n = 0;
    std::vector<bool> delayed;  // n*n
    std::vector<bool> inst;     // n*n

    static GroundTruthGraph from_spec(const LatentProcessSpec& spec);
    bool delayed_at(int i, int j) const { return delayed[static_cast<std::size_t>(i) * n + j]; }
    bool inst_at(int i, int j) const { return inst[static_cast<std::size_t>(i) * n + j]; }
};

// The process unrolled over a window of consecutive timestamps. Node (t, i)
// has index t * n + i; timestamp 0 is the earliest slice and has no
// in-window delayed parents.
Dag unroll_window(const GroundTruthGraph& g, int timestamps);

// Human-readable node label. Slices are named relative to the final
// timestamp: "z[t-2,i]", "z[t-1,i]", "z[t,i]" with 1-based latent index.
std::string window_node_label(int v, int timestamps, int n);

// Moralization: undirected skeleton plus an edge between every pair of
// co-parents. For a DAG this is the Markov network of its distribution.
UndirectedGraph moralize(const Dag& dag);

// Markov network of the unrolled process together with its window geometry.
struct MarkovNet {
    int timestamps = 0;
    int n = 0;
    UndirectedGraph graph;

    int index(int t, int i) const { return t * n + i; }
    std::string label(int v) const { return window_node_label(v, timestamps, n); }
};

MarkovNet moral_graph(const GroundTruthGraph& g, int timestamps);

// Neighbors of v that are adjacent to every other neighbor of v, sorted.
std::vector<int> intimate_set(const UndirectedGraph& g, int v);

enum class SparsityCase { kEmptySet, kChildEmptySet, kViolated };

// Per-node classification of the structural sparsity condition at one
// timestamp of the window: a node passes if its intimate set in the Markov
// network is empty, or failing that, if one of its direct children in the
// unrolled process has an empty intimate set.
struct SparsityReport {
    int t_index = 0;
    std::vector<SparsityCase> per_node;
    bool satisfied = false;
    std::string to_string(const MarkovNet& m) const;
};

SparsityReport check_sparse_process(const GroundTruthGraph& g, const MarkovNet& m,
                                    int t_index = -1);

// Two-slice picture of the ground-truth process as DOT text.
std::string ground_truth_dot(const GroundTruthGraph& g);

} // namespace idol::scm
