#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "idol/eval/graph_recover.hpp"
#include "idol/eval/jacobians.hpp"
#include "idol/eval/metrics.hpp"
#include "idol/nn/idol_model.hpp"
#include "idol/scm/dataset.hpp"
#include "idol/scm/graphs.hpp"
#include "idol/scm/mixing.hpp"
#include "idol/scm/presets.hpp"
#include "idol/util/errors.hpp"
#include "idol/util/rng.hpp"

#include "oracles.hpp"
#include "testutil.hpp"

using namespace idol;
using eval::Assignment;
using eval::CorrMethod;
using eval::EdgeRule;
using eval::GraphEstimate;

namespace {

diff::Tensor square(int n, std::vector<double> vals) {
    return diff::Tensor::from({n, n}, std::move(vals));
}

// Exhaustive matching oracle: maximum total over all permutations, ties
// resolved by the enumeration order, which is already lexicographic.
Assignment assignment_bruteforce(const diff::Tensor& score) {
    const int n = score.rows();
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1e300;
    std::vector<int> trial = perm;
    do {
        double total = 0.0;
        for (int k = 0; k < n; ++k) total += score.at(trial[k], k);
        if (total > best) best = total;
    } while (std::next_permutation(trial.begin(), trial.end()));

    const double eps = 1e-11 * std::max(1.0, std::abs(best));
    Assignment a;
    do {
        double total = 0.0;
        for (int k = 0; k < n; ++k) total += score.at(perm[k], k);
        if (total >= best - eps) {
            a.perm = perm;
            a.total = total;
            return a;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return a;
}

GraphEstimate preset_a_estimate(const scm::GroundTruthGraph& truth) {
    GraphEstimate est(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            est.delayed[static_cast<std::size_t>(i) * 3 + j] = truth.delayed_at(i, j);
    est.inst_skeleton[0 * 3 + 1] = est.inst_skeleton[1 * 3 + 0] = true;
    est.inst_skeleton[1 * 3 + 2] = est.inst_skeleton[2 * 3 + 1] = true;
    return est;
}

scm::Dataset tiny_dataset(int num_sequences, int val_count, int seq_len = 5) {
    auto p = scm::preset("A");
    p.process.seq_len = seq_len;
    auto mixing = scm::make_random_mixing(3, 2, 4040);
    return scm::generate(p.process, mixing, num_sequences, 5, 321, val_count, 1);
}

nn::ModelConfig tiny_model_config(int seq_len = 5) {
    nn::ModelConfig cfg;
    cfg.n = 3;
    cfg.d_x = 3;
    cfg.seq_len = seq_len;
    cfg.enc_width = 16;
    cfg.enc_depth = 2;
    cfg.dec_width = 16;
    cfg.dec_depth = 2;
    cfg.prior_width = 8;
    cfg.prior_depth = 1;
    return cfg;
}

} // namespace

// ---------------------------------------------------------------------------
// correlation and matching
// ---------------------------------------------------------------------------

TEST_CASE("correlation matrix matches itself and affine images") {
    util::Rng rng(11, "corr");
    auto z = testutil::rand_tensor<double>(rng, {200, 3});
    auto self = eval::correlation_matrix(z, z, CorrMethod::kPearson);
    for (int i = 0; i < 3; ++i) {
        CHECK(self.at(i, i) == doctest::Approx(1.0).epsilon(1e-12));
        for (int k = 0; k < 3; ++k)
            if (k != i) CHECK(self.at(i, k) < 1.0);
    }

    // Negative scaling and shifts leave the absolute correlation at one.
    diff::Tensor zhat = diff::Tensor::zeros({200, 3});
    for (int r = 0; r < 200; ++r)
        for (int c = 0; c < 3; ++c)
            zhat.at(r, c) = -1.7 * z.at(r, c) + 0.4 * (c + 1);
    auto affine = eval::correlation_matrix(z, zhat, CorrMethod::kPearson);
    for (int i = 0; i < 3; ++i)
        CHECK(affine.at(i, i) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("independent columns correlate near zero") {
    util::Rng rng(12, "corr-null");
    diff::Tensor z = diff::Tensor::zeros({4000, 2});
    diff::Tensor h = diff::Tensor::zeros({4000, 2});
    for (auto& v : z.data()) v = rng.normal();
    for (auto& v : h.data()) v = rng.normal();
    auto c = eval::correlation_matrix(z, h, CorrMethod::kPearson);
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) CHECK(c.at(i, k) <= 0.05);
}

TEST_CASE("constant columns correlate zero and shapes are enforced") {
    diff::Tensor z = diff::Tensor::zeros({50, 2});
    diff::Tensor h = diff::Tensor::zeros({50, 2});
    util::Rng rng(13, "corr-const");
    for (int r = 0; r < 50; ++r) {
        z.at(r, 0) = rng.normal();
        z.at(r, 1) = 3.25; // constant
        h.at(r, 0) = z.at(r, 0);
        h.at(r, 1) = rng.normal();
    }
    auto c = eval::correlation_matrix(z, h, CorrMethod::kPearson);
    CHECK(c.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.at(1, 0) == 0.0);
    CHECK(c.at(1, 1) == 0.0);

    CHECK_THROWS_AS(
        eval::correlation_matrix(diff::Tensor::zeros({2, 2}),
                                 diff::Tensor::zeros({2, 2}),
                                 CorrMethod::kPearson),
        idol::DataError);
    CHECK_THROWS_AS(
        eval::correlation_matrix(diff::Tensor::zeros({5, 2}),
                                 diff::Tensor::zeros({6, 2}),
                                 CorrMethod::kPearson),
        idol::ShapeError);
}

TEST_CASE("rank correlation sees through monotone warping") {
    util::Rng rng(14, "spearman");
    diff::Tensor z = diff::Tensor::zeros({300, 1});
    diff::Tensor h = diff::Tensor::zeros({300, 1});
    for (int r = 0; r < 300; ++r) {
        const double v = rng.uniform(-2.0, 2.0);
        z.at(r, 0) = v;
        h.at(r, 0) = v * v * v; // strictly increasing, nonlinear
    }
    auto sp = eval::correlation_matrix(z, h, CorrMethod::kSpearman);
    auto pe = eval::correlation_matrix(z, h, CorrMethod::kPearson);
    CHECK(sp.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pe.at(0, 0) < 0.99);
}

TEST_CASE("assignment solves the worked example and breaks ties low") {
    auto a = eval::optimal_assignment(square(2, {0.9, 0.1, 0.2, 0.8}));
    CHECK(a.perm == std::vector<int>{0, 1});
    CHECK(a.total == doctest::Approx(1.7).epsilon(1e-12));

    // Fully tied matrix: every matching scores the same, so the permutation
    // must come out as the identity.
    auto tie = eval::optimal_assignment(square(3, std::vector<double>(9, 0.5)));
    CHECK(tie.perm == std::vector<int>{0, 1, 2});
    CHECK(tie.total == doctest::Approx(1.5).epsilon(1e-12));

    // Dominant anti-diagonal flips the matching.
    auto rev = eval::optimal_assignment(square(2, {0.1, 0.9, 0.9, 0.1}));
    CHECK(rev.perm == std::vector<int>{1, 0});

    CHECK_THROWS_AS(eval::optimal_assignment(diff::Tensor::zeros({2, 3})),
                    idol::ShapeError);
}

TEST_CASE("assignment agrees with exhaustive search up to n = 6") {
    util::Rng rng(15, "assign");
    for (int n = 2; n <= 6; ++n) {
        for (int trial = 0; trial < 25; ++trial) {
            diff::Tensor score = diff::Tensor::zeros({n, n});
            for (auto& v : score.data()) v = rng.uniform();
            auto fast = eval::optimal_assignment(score);
            auto slow = assignment_bruteforce(score);
            CHECK(fast.total == doctest::Approx(slow.total).epsilon(1e-9));
            CHECK(fast.perm == slow.perm);
        }
    }
    // Deliberate ties from duplicated rows.
    for (int trial = 0; trial < 20; ++trial) {
        diff::Tensor score = diff::Tensor::zeros({4, 4});
        for (int c = 0; c < 4; ++c) {
            const double v = std::floor(rng.uniform() * 4.0) / 4.0;
            for (int r = 0; r < 4; ++r)
                score.at(r, c) = (r < 2) ? v : 1.0 - v;
        }
        auto fast = eval::optimal_assignment(score);
        auto slow = assignment_bruteforce(score);
        CHECK(fast.total == doctest::Approx(slow.total).epsilon(1e-9));
        CHECK(fast.perm == slow.perm);
    }
}

TEST_CASE("mcc is invariant to column permutation and scaling") {
    util::Rng rng(16, "mcc");
    auto z = testutil::rand_tensor<double>(rng, {300, 4});
    const int perm[4] = {2, 0, 3, 1};
    const double scale[4] = {-0.5, 2.0, 1.0, -3.0};
    diff::Tensor zhat = diff::Tensor::zeros({300, 4});
    for (int r = 0; r < 300; ++r)
        for (int c = 0; c < 4; ++c)
            zhat.at(r, c) = scale[c] * z.at(r, perm[c]) + 0.1 * c;
    CHECK(eval::mcc(z, zhat, CorrMethod::kPearson) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eval::mcc(z, zhat, CorrMethod::kSpearman) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(eval::mcc(z, diff::Tensor::zeros({300, 3}),
                              CorrMethod::kPearson),
                    idol::ShapeError);
}

TEST_CASE("align_matrix reindexes rows and columns together") {
    // Estimated coordinate k matches true coordinate perm[k].
    const std::vector<int> perm = {1, 2, 0};
    diff::Tensor m = diff::Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m.at(i, j) = 10.0 * i + j;
    auto aligned = eval::align_matrix(m, perm);
    // True pair (i, j) must read from the estimated coordinates matched to
    // them: inv = {2, 0, 1}.
    CHECK(aligned.at(0, 0) == 22.0);
    CHECK(aligned.at(0, 1) == 20.0);
    CHECK(aligned.at(1, 2) == 1.0);
    CHECK(aligned.at(2, 0) == 12.0);

    CHECK_THROWS_AS(eval::align_matrix(m, std::vector<int>{0, 0, 1}),
                    idol::ContractError);
    CHECK_THROWS_AS(eval::align_matrix(m, std::vector<int>{0, 1}),
                    idol::ShapeError);
}

TEST_CASE("metrics json carries every field") {
    eval::Metrics m;
    m.mcc = 0.875;
    m.f1_delayed = 1.0;
    m.f1_inst = 0.5;
    m.shd = 3;
    const std::string doc = eval::metrics_json(m, 0.25, 769, "cfg-abc");
    CHECK(doc.find("\"mcc\": 0.875") != std::string::npos);
    CHECK(doc.find("\"f1_delayed\": 1.0") != std::string::npos);
    CHECK(doc.find("\"f1_inst\": 0.5") != std::string::npos);
    CHECK(doc.find("\"shd\": 3") != std::string::npos);
    CHECK(doc.find("\"threshold\": 0.25") != std::string::npos);
    CHECK(doc.find("\"seed\": 769") != std::string::npos);
    CHECK(doc.find("\"config_hash\": \"cfg-abc\"") != std::string::npos);
    CHECK(doc.back() == '\n');
}

// ---------------------------------------------------------------------------
// thresholding
// ---------------------------------------------------------------------------

TEST_CASE("thresholding keeps entries relative to each matrix maximum") {
    auto jd = square(2, {1.0, 0.3, 0.0, 0.8});
    auto je = square(2, {1.0, 0.1, 0.9, 1.0});
    auto est = eval::threshold_graph(jd, je, 0.5);
    CHECK(est.cut_delayed == doctest::Approx(0.5));
    CHECK(est.cut_inst == doctest::Approx(0.5));
    CHECK(est.delayed_at(0, 0));
    CHECK(est.delayed_at(1, 1));
    CHECK_FALSE(est.delayed_at(0, 1));
    CHECK_FALSE(est.delayed_at(1, 0));
    // Off-diagonal support symmetrizes; the diagonal never enters.
    CHECK(est.skeleton_at(0, 1));
    CHECK(est.skeleton_at(1, 0));
    CHECK_FALSE(est.skeleton_at(0, 0));
    CHECK_FALSE(est.skeleton_at(1, 1));

    // tau = 0 keeps everything with nonzero support present.
    auto all = eval::threshold_graph(jd, je, 0.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(all.delayed_at(i, j));
}

TEST_CASE("thresholding an all-zero matrix keeps nothing") {
    auto zero = diff::Tensor::zeros({3, 3});
    auto est = eval::threshold_graph(zero, zero, 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK_FALSE(est.delayed_at(i, j));
            CHECK_FALSE(est.skeleton_at(i, j));
        }

    // One empty side stays empty while the other keeps its support.
    auto je = square(3, {1, 0, 0, 0.8, 1, 0, 0, 0, 1});
    auto mixed = eval::threshold_graph(zero, je, 0.5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK_FALSE(mixed.delayed_at(i, j));
    CHECK(mixed.skeleton_at(0, 1));
    CHECK(mixed.skeleton_at(1, 0));
    CHECK_FALSE(mixed.skeleton_at(0, 2));
    CHECK_FALSE(mixed.skeleton_at(1, 2));
}

TEST_CASE("thresholding validates its inputs") {
    auto jd = diff::Tensor::zeros({2, 2});
    CHECK_THROWS_AS(eval::threshold_graph(jd, diff::Tensor::zeros({3, 3}), 0.5),
                    idol::ShapeError);
    CHECK_THROWS_AS(eval::threshold_graph(jd, jd, -0.1), idol::ConfigError);
    CHECK_THROWS_AS(eval::threshold_graph(jd, jd, 1.5), idol::ConfigError);
    auto neg = square(2, {1.0, -0.2, 0.0, 1.0});
    CHECK_THROWS_AS(eval::threshold_graph(neg, jd, 0.5), idol::ContractError);
}

// ---------------------------------------------------------------------------
// d-separation
// ---------------------------------------------------------------------------

TEST_CASE("dsep handles chains and colliders") {
    scm::Dag chain(3);
    chain.add_edge(0, 1);
    chain.add_edge(1, 2);
    CHECK_FALSE(eval::dsep(chain, 0, 2, {}));
    CHECK(eval::dsep(chain, 0, 2, {1}));

    scm::Dag collider(3);
    collider.add_edge(0, 2);
    collider.add_edge(1, 2);
    CHECK(eval::dsep(collider, 0, 1, {}));
    CHECK_FALSE(eval::dsep(collider, 0, 1, {2}));

    CHECK_THROWS_AS(eval::dsep(chain, 0, 0, {}), idol::ContractError);
    CHECK_THROWS_AS(eval::dsep(chain, 0, 2, {0}), idol::ContractError);
    CHECK_THROWS_AS(eval::dsep(chain, 0, 5, {}), idol::ContractError);
}

TEST_CASE("dsep agrees with path enumeration on random graphs") {
    util::Rng rng(17, "dsep");
    for (int g = 0; g < 50; ++g) {
        auto dag = oracles::random_dag(rng, 6, 0.35);
        for (int a = 0; a < 6; ++a)
            for (int b = a + 1; b < 6; ++b)
                for (const auto& s : oracles::conditioning_sets(6, a, b)) {
                    const std::vector<int> cond(s.begin(), s.end());
                    const bool fast = eval::dsep(dag, a, b, cond);
                    const bool slow = oracles::dsep_bruteforce(dag, a, b, s);
                    CHECK(fast == slow);
                    CHECK(eval::dsep(dag, b, a, cond) == fast);
                }
    }
}

TEST_CASE("the exact oracle answers over the two-slice window") {
    auto truth = scm::GroundTruthGraph::from_spec(scm::preset("A").process);
    auto ci = eval::exact_ci_oracle(truth);
    auto window = scm::unroll_window(truth, 2);
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b)
            for (const auto& s : oracles::conditioning_sets(6, a, b)) {
                const std::vector<int> cond(s.begin(), s.end());
                CHECK(ci(a, b, cond) ==
                      oracles::dsep_bruteforce(window, a, b, s));
            }
}

// ---------------------------------------------------------------------------
// data-driven independence tests
// ---------------------------------------------------------------------------

TEST_CASE("partial correlation test separates a linear chain") {
    util::Rng rng(18, "ci-chain");
    const int m = 4000;
    diff::Tensor s = diff::Tensor::zeros({m, 3});
    for (int r = 0; r < m; ++r) {
        const double x0 = rng.normal();
        const double x1 = 0.8 * x0 + rng.normal();
        const double x2 = 0.8 * x1 + rng.normal();
        s.at(r, 0) = x0;
        s.at(r, 1) = x1;
        s.at(r, 2) = x2;
    }
    CHECK_FALSE(eval::partial_corr_ci(s, 0, 2, {}, 0.01));
    CHECK_FALSE(eval::partial_corr_ci(s, 0, 1, {}, 0.01));
    CHECK(eval::partial_corr_ci(s, 0, 2, {1}, 0.01));

    auto oracle = eval::data_ci_oracle(s, 0.01);
    CHECK(oracle(0, 2, {1}) == eval::partial_corr_ci(s, 0, 2, {1}, 0.01));
}

TEST_CASE("partial correlation test exposes a collider") {
    util::Rng rng(19, "ci-collider");
    const int m = 4000;
    diff::Tensor s = diff::Tensor::zeros({m, 3});
    for (int r = 0; r < m; ++r) {
        const double x0 = rng.normal();
        const double x1 = rng.normal();
        const double x2 = x0 + x1 + 0.5 * rng.normal();
        s.at(r, 0) = x0;
        s.at(r, 1) = x1;
        s.at(r, 2) = x2;
    }
    CHECK(eval::partial_corr_ci(s, 0, 1, {}, 0.01));
    CHECK_FALSE(eval::partial_corr_ci(s, 0, 1, {2}, 0.01));
}

TEST_CASE("partial correlation test rejects bad inputs") {
    diff::Tensor s = diff::Tensor::zeros({10, 2});
    util::Rng rng(20, "ci-bad");
    for (auto& v : s.data()) v = rng.normal();
    CHECK_THROWS_AS(eval::partial_corr_ci(s, 0, 2, {}, 0.01),
                    idol::ContractError);
    diff::Tensor few = diff::Tensor::zeros({3, 2});
    for (auto& v : few.data()) v = rng.normal();
    CHECK_THROWS_AS(eval::partial_corr_ci(few, 0, 1, {}, 0.01),
                    idol::DataError);

    // A duplicated column makes the correlation matrix singular; the test
    // reports dependence instead of failing.
    diff::Tensor dup = diff::Tensor::zeros({50, 2});
    for (int r = 0; r < 50; ++r) {
        dup.at(r, 0) = rng.normal();
        dup.at(r, 1) = dup.at(r, 0);
    }
    CHECK_FALSE(eval::partial_corr_ci(dup, 0, 1, {}, 0.01));
}

// ---------------------------------------------------------------------------
// orientation
// ---------------------------------------------------------------------------

TEST_CASE("orientation resolves the three-coordinate reference process") {
    auto truth = scm::GroundTruthGraph::from_spec(scm::preset("A").process);
    auto est = preset_a_estimate(truth);
    auto ci = eval::exact_ci_oracle(truth);
    auto res = eval::orient(est, ci);

    CHECK(res.oriented_at(0, 1));
    CHECK(res.rule_at(0, 1) == EdgeRule::kChain);
    CHECK(res.oriented_at(1, 2));
    CHECK(res.rule_at(1, 2) == EdgeRule::kVStructure);
    CHECK_FALSE(res.oriented_at(1, 0));
    CHECK_FALSE(res.oriented_at(2, 1));
    CHECK(res.notes.empty());
    // Delayed structure passes through untouched.
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(res.delayed_at(i, j) == truth.delayed_at(i, j));

    auto m = eval::graph_metrics(res, truth);
    CHECK(m.f1_delayed == doctest::Approx(1.0));
    CHECK(m.f1_inst == doctest::Approx(1.0));
    CHECK(m.shd == 0);

    // A second pass changes nothing.
    auto again = eval::orient(res, ci);
    CHECK(again.inst_oriented == res.inst_oriented);
    CHECK(again.rule == res.rule);
    CHECK(again.notes == res.notes);

    const std::string dot = eval::graph_estimate_dot(res);
    CHECK(dot.find("p1 -> c0") != std::string::npos);
    CHECK(dot.find("c0 -> c1 [rule=chain]") != std::string::npos);
    CHECK(dot.find("c1 -> c2 [rule=v]") != std::string::npos);
}

TEST_CASE("shielded anchors leave edges unoriented") {
    // Every coordinate feeds every next-step coordinate, so no anchor pair
    // is ever nonadjacent and no vote can be cast.
    scm::LatentProcessSpec spec = scm::preset("A").process;
    spec.w.assign(9, 1.0);
    auto truth = scm::GroundTruthGraph::from_spec(spec);
    auto est = preset_a_estimate(truth);
    auto res = eval::orient(est, eval::exact_ci_oracle(truth));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK_FALSE(res.oriented_at(i, j));
    CHECK(res.notes.empty());

    const std::string dot = eval::graph_estimate_dot(res);
    CHECK(dot.find("[dir=none, rule=none]") != std::string::npos);
}

TEST_CASE("contradictory votes are reported and leave the edge open") {
    // An oracle claiming the empty set separates everything makes both roles
    // of the edge vote for a collider, which cannot both hold.
    GraphEstimate est(2);
    est.delayed[0 * 2 + 0] = true; // previous 0 -> current 0
    est.delayed[1 * 2 + 1] = true; // previous 1 -> current 1
    est.inst_skeleton[0 * 2 + 1] = est.inst_skeleton[1 * 2 + 0] = true;
    eval::CiOracle always = [](int, int, const std::vector<int>&) {
        return true;
    };
    auto res = eval::orient(est, always);
    CHECK_FALSE(res.oriented_at(0, 1));
    CHECK_FALSE(res.oriented_at(1, 0));
    REQUIRE(res.notes.size() == 1);
    CHECK(res.notes[0].find("contradictory") != std::string::npos);
}

TEST_CASE("a missing separating set is noted") {
    GraphEstimate est(2);
    est.delayed[0 * 2 + 0] = true;
    est.inst_skeleton[0 * 2 + 1] = est.inst_skeleton[1 * 2 + 0] = true;
    eval::CiOracle never = [](int, int, const std::vector<int>&) {
        return false;
    };
    auto res = eval::orient(est, never);
    CHECK_FALSE(res.oriented_at(0, 1));
    CHECK_FALSE(res.oriented_at(1, 0));
    REQUIRE(res.notes.size() == 1);
    CHECK(res.notes[0].find("no separating set") != std::string::npos);
}

TEST_CASE("chain propagation extends existing orientations") {
    eval::CiOracle unused = [](int, int, const std::vector<int>&) {
        return false;
    };

    // 0 -> 1 - 2 with 0 and 2 nonadjacent forces 1 -> 2.
    GraphEstimate line(3);
    line.inst_skeleton[0 * 3 + 1] = line.inst_skeleton[1 * 3 + 0] = true;
    line.inst_skeleton[1 * 3 + 2] = line.inst_skeleton[2 * 3 + 1] = true;
    line.inst_oriented[0 * 3 + 1] = true;
    line.rule[0 * 3 + 1] = EdgeRule::kVStructure;
    auto res = eval::orient(line, unused);
    CHECK(res.oriented_at(1, 2));
    CHECK(res.rule_at(1, 2) == EdgeRule::kChain);
    CHECK(res.oriented_at(0, 1)); // input orientation preserved
    CHECK(res.rule_at(0, 1) == EdgeRule::kVStructure);

    // 0 -> 1 -> 2 with the closing edge 0 - 2 undirected forces 0 -> 2.
    GraphEstimate tri(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) tri.inst_skeleton[static_cast<std::size_t>(i) * 3 + j] = true;
    tri.inst_oriented[0 * 3 + 1] = true;
    tri.inst_oriented[1 * 3 + 2] = true;
    auto closed = eval::orient(tri, unused);
    CHECK(closed.oriented_at(0, 2));
    CHECK(closed.rule_at(0, 2) == EdgeRule::kChain);
}

TEST_CASE("orientation invariants are enforced") {
    eval::CiOracle unused = [](int, int, const std::vector<int>&) {
        return false;
    };
    GraphEstimate off(2);
    off.inst_oriented[0 * 2 + 1] = true; // no skeleton edge underneath
    CHECK_THROWS_AS(eval::orient(off, unused), idol::ContractError);

    GraphEstimate cyc(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) cyc.inst_skeleton[static_cast<std::size_t>(i) * 3 + j] = true;
    cyc.inst_oriented[0 * 3 + 1] = true;
    cyc.inst_oriented[1 * 3 + 2] = true;
    cyc.inst_oriented[2 * 3 + 0] = true;
    CHECK_THROWS_AS(eval::orient(cyc, unused), idol::ContractError);
}

// ---------------------------------------------------------------------------
// graph metrics
// ---------------------------------------------------------------------------

TEST_CASE("graph metrics count support errors and misorientations") {
    auto truth = scm::GroundTruthGraph::from_spec(scm::preset("A").process);

    GraphEstimate est(3);
    // Delayed support missing one true edge: (0, 1).
    est.delayed[0 * 3 + 0] = true;
    est.delayed[1 * 3 + 1] = true;
    est.delayed[2 * 3 + 2] = true;
    // True inst edges {0,1} and {1,2}, plus a spurious {0,2}.
    est.inst_skeleton[0 * 3 + 1] = est.inst_skeleton[1 * 3 + 0] = true;
    est.inst_skeleton[1 * 3 + 2] = est.inst_skeleton[2 * 3 + 1] = true;
    est.inst_skeleton[0 * 3 + 2] = est.inst_skeleton[2 * 3 + 0] = true;
    // One true edge oriented against the generating direction.
    est.inst_oriented[1 * 3 + 0] = true;

    auto m = eval::graph_metrics(est, truth);
    CHECK(m.f1_delayed == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
    CHECK(m.f1_inst == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
    CHECK(m.shd == 3); // one missing delayed, one extra inst, one misoriented

    // Unoriented edges are not charged.
    est.inst_oriented[1 * 3 + 0] = false;
    CHECK(eval::graph_metrics(est, truth).shd == 2);

    CHECK_THROWS_AS(eval::graph_metrics(GraphEstimate(2), truth),
                    idol::ShapeError);
}

TEST_CASE("empty graphs compare as perfect") {
    scm::LatentProcessSpec spec;
    spec.n = 2;
    spec.w.assign(4, 0.0);
    spec.v.assign(4, 0.0);
    auto truth = scm::GroundTruthGraph::from_spec(spec);
    auto m = eval::graph_metrics(GraphEstimate(2), truth);
    CHECK(m.f1_delayed == doctest::Approx(1.0));
    CHECK(m.f1_inst == doctest::Approx(1.0));
    CHECK(m.shd == 0);
}

// ---------------------------------------------------------------------------
// latent and Jacobian extraction
// ---------------------------------------------------------------------------

TEST_CASE("latent extraction aligns encoder means with stored latents") {
    auto ds = tiny_dataset(24, 8);
    nn::IdolModel<double> model(tiny_model_config(), 99);
    auto lat = eval::extract_latents(model, ds);
    REQUIRE(lat.zhat.rows() == 8 * 5);
    REQUIRE(lat.zhat.cols() == 3);
    REQUIRE(lat.ztrue.rows() == 8 * 5);
    for (int k = 0; k < 8; ++k) {
        const float* src = ds.z_seq(k);
        for (int t = 0; t < 5; ++t)
            for (int c = 0; c < 3; ++c)
                CHECK(lat.ztrue.at(k * 5 + t, c) ==
                      static_cast<double>(src[t * 3 + c]));
    }

    auto broken = ds;
    broken.val_count = 0;
    CHECK_THROWS_AS(eval::extract_latents(model, broken), idol::DataError);
    nn::IdolModel<double> other(tiny_model_config(4), 99);
    CHECK_THROWS_AS(eval::extract_latents(other, ds), idol::ConfigError);
}

TEST_CASE("mean Jacobians of linear coordinate maps are exact") {
    auto ds = tiny_dataset(24, 8);
    auto cfg = tiny_model_config();
    cfg.prior_depth = 0; // coordinate maps become affine in their inputs
    nn::IdolModel<double> model(cfg, 99);
    util::Rng rng(21, "linear-prior");
    auto& nets = model.prior_nets();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < nets[i].out.w.rows(); ++j)
            nets[i].out.w.at(j, 0) = rng.uniform(-0.6, 0.6);

    auto [jd, je] = eval::extract_mean_jacobians(model, ds, 1);
    for (int i = 0; i < 3; ++i) {
        const auto& w = nets[static_cast<std::size_t>(i)].out.w;
        for (int j = 0; j < 3; ++j)
            CHECK(jd.at(i, j) ==
                  doctest::Approx(std::abs(w.at(j, 0))).epsilon(1e-12));
        for (int c = 0; c < i; ++c)
            CHECK(je.at(i, c) ==
                  doctest::Approx(std::abs(w.at(3 + c, 0))).epsilon(1e-12));
        CHECK(je.at(i, i) ==
              doctest::Approx(std::abs(w.at(3 + i, 0) + 1.0)).epsilon(1e-12));
        for (int c = i + 1; c < 3; ++c) CHECK(je.at(i, c) == 0.0);
    }
}

TEST_CASE("mean Jacobians match the single-step probe on one transition") {
    auto ds = tiny_dataset(6, 1, 2);
    auto cfg = tiny_model_config(2);
    nn::IdolModel<double> model(cfg, 55);
    util::Rng rng(22, "probe");
    for (auto& net : model.prior_nets())
        for (int j = 0; j < net.out.w.rows(); ++j)
            net.out.w.at(j, 0) = rng.uniform(-0.3, 0.3);

    auto lat = eval::extract_latents(model, ds);
    diff::Tensor zprev = diff::Tensor::zeros({1, 3});
    diff::Tensor zcur = diff::Tensor::zeros({1, 3});
    for (int c = 0; c < 3; ++c) {
        zprev.at(0, c) = lat.zhat.at(0, c);
        zcur.at(0, c) = lat.zhat.at(1, c);
    }
    auto [jd_ref, je_ref] = model.jacobians(zprev, zcur);
    auto [jd, je] = eval::extract_mean_jacobians(model, ds, 1);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(jd.at(i, j) ==
                  doctest::Approx(std::abs(jd_ref.at(i, j))).epsilon(1e-12));
            CHECK(je.at(i, j) ==
                  doctest::Approx(std::abs(je_ref.at(i, j))).epsilon(1e-12));
        }
}

TEST_CASE("mean Jacobians are identical for any thread count") {
    auto ds = tiny_dataset(100, 80);
    nn::IdolModel<double> model(tiny_model_config(), 77);
    auto [jd1, je1] = eval::extract_mean_jacobians(model, ds, 1);
    auto [jd3, je3] = eval::extract_mean_jacobians(model, ds, 3);
    CHECK(jd1.data() == jd3.data());
    CHECK(je1.data() == je3.data());
}
