#pragma once

#include <functional>
#include <string>
#include <vector>

#include "idol/diff/tensor.hpp"
#include "idol/eval/metrics.hpp"
#include "idol/scm/graphs.hpp"

namespace idol::eval {

enum class EdgeRule { kNone = 0, kVStructure = 1, kChain = 2 };

// Recovered window structure over latent coordinates. Delayed entries use
// the row = effect, column = cause convention; instantaneous structure is an
// undirected skeleton plus the subset of edges the orientation rules fix.
struct GraphEstimate {
    int n = 0;
    std::vector<bool> delayed;       // n*n, (i, j): previous j -> current i
    std::vector<bool> inst_skeleton; // n*n symmetric, zero diagonal
    std::vector<bool> inst_oriented; // n*n, (i, j): current i -> current j
    std::vector<EdgeRule> rule;      // n*n, tag for oriented edge (i, j)
    double tau_rel = 0.0;
    double cut_delayed = 0.0; // absolute thresholds actually applied
    double cut_inst = 0.0;
    std::vector<std::string> notes; // inconsistency reports

    explicit GraphEstimate(int dim = 0)
        : n(dim), delayed(static_cast<std::size_t>(dim) * dim, false),
          inst_skeleton(static_cast<std::size_t>(dim) * dim, false),
          inst_oriented(static_cast<std::size_t>(dim) * dim, false),
          rule(static_cast<std::size_t>(dim) * dim, EdgeRule::kNone) {}

    bool delayed_at(int i, int j) const { return delayed[static_cast<std::size_t>(i) * n + j]; }
    bool skeleton_at(int i, int j) const { return inst_skeleton[static_cast<std::size_t>(i) * n + j]; }
    bool oriented_at(int i, int j) const { return inst_oriented[static_cast<std::size_t>(i) * n + j]; }
    EdgeRule rule_at(int i, int j) const { return rule[static_cast<std::size_t>(i) * n + j]; }
};

// Keeps entries at or above tau_rel times the matrix maximum, separately for
// the delayed and instantaneous mean Jacobians. The instantaneous skeleton
// is the symmetrized support of the surviving off-diagonal entries. An
// all-zero matrix keeps nothing.
GraphEstimate threshold_graph(const diff::Tensor& jd_bar,
                              const diff::Tensor& je_bar, double tau_rel);

// Exact d-separation: moralize the subgraph induced by the ancestors of
// {a, b} and the conditioning set, then test undirected reachability with
// the conditioning nodes removed.
bool dsep(const scm::Dag& dag, int a, int b, const std::vector<int>& cond);

// Conditional-independence oracle over window nodes: indices 0..n-1 are the
// previous slice, n..2n-1 the current slice. Returns true when a and b are
// independent given the set.
using CiOracle = std::function<bool(int, int, const std::vector<int>&)>;

CiOracle exact_ci_oracle(const scm::GroundTruthGraph& truth);

// Fisher z-test on the partial correlation of columns a and b given the
// columns in cond. Returns true (independent) when the test does not reject
// at alpha_level.
bool partial_corr_ci(const diff::Tensor& samples, int a, int b,
                     const std::vector<int>& cond, double alpha_level);

CiOracle data_ci_oracle(const diff::Tensor& samples, double alpha_level);

struct OrientOptions {
    int max_sepset = 6; // cap on conditioning-set size during the search
};

// Orients instantaneous edges using anchors from the previous slice: for an
// unshielded triple anchor -> mid - far, the first separating set of
// (anchor, far) decides between a collider (mid outside the set) and a chain
// (mid inside). Chain propagation then runs to fixpoint. Contradictory votes
// leave the edge unoriented and are reported in notes. Existing orientations
// in the input are kept, so the operation is idempotent.
GraphEstimate orient(const GraphEstimate& est, const CiOracle& ci,
                     const OrientOptions& opt = {});

// Support-recovery F1 for both edge families and a structural Hamming
// distance. The SHD counts missing and extra edges in either family plus
// instantaneous edges oriented against the true direction; edges left
// unoriented are not charged. The mcc field is left at zero.
Metrics graph_metrics(const GraphEstimate& est, const scm::GroundTruthGraph& truth);

// Two-slice DOT rendering with rule=v|chain|none edge attributes.
std::string graph_estimate_dot(const GraphEstimate& est);

} // namespace idol::eval
