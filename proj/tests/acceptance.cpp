// End-to-end acceptance suite. Prints one line per criterion and exits with
// the number of failures. Training-based criteria shell out to the command
// line binary so the released pipeline itself is what gets exercised; the
// numeric criteria run in-process against independent oracles.
//
// Usage: acceptance <idol-binary> [scratch-dir]
// IDOL_ACCEPT_JOBS caps concurrent training processes (default 4).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "idol/diff/check.hpp"
#include "idol/eval/graph_recover.hpp"
#include "idol/eval/jacobians.hpp"
#include "idol/eval/metrics.hpp"
#include "idol/nn/idol_model.hpp"
#include "idol/scm/dataset.hpp"
#include "idol/scm/graphs.hpp"
#include "idol/scm/mixing.hpp"
#include "idol/scm/presets.hpp"
#include "idol/scm/process.hpp"
#include "idol/util/errors.hpp"
#include "idol/util/rng.hpp"

#include "oracles.hpp"

namespace {

using namespace idol;

// ---------------------------------------------------------------------------
// infrastructure
// ---------------------------------------------------------------------------

struct Criterion {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<Criterion> g_results;

void record(const std::string& name, bool pass, const std::string& detail) {
    g_results.push_back({name, pass, detail});
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name << "  " << detail
              << std::endl;
}

int jobs_from_env() {
    const char* v = std::getenv("IDOL_ACCEPT_JOBS");
    if (!v) return 4;
    const int j = std::atoi(v);
    return j >= 1 ? j : 4;
}

// Runs shell commands with bounded parallelism; returns one exit status per
// command, in order.
std::vector<int> run_pool(const std::vector<std::string>& cmds, int jobs) {
    std::vector<int> status(cmds.size(), -1);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int count = std::min<int>(jobs, static_cast<int>(cmds.size()));
    for (int w = 0; w < count; ++w) {
        workers.emplace_back([&]() {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= cmds.size()) return;
                status[k] = std::system(cmds[k].c_str());
            }
        });
    }
    for (auto& t : workers) t.join();
    return status;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("acceptance: cannot open " + path);
    return nlohmann::json::parse(in);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("acceptance: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string q(const std::string& s) { return "'" + s + "'"; }

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// training-run schedule (criteria 1-5)
// ---------------------------------------------------------------------------

// One trained-and-evaluated pipeline invocation.
struct Run {
    std::string preset;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    double beta = 0.0;
    std::string ds_dir;
    std::string run_dir;
    std::string eval_dir;
};

struct TrainSettings {
    int epochs = 25;
    int samples = 10000;
};

std::string gen_cmd(const std::string& bin, const Run& r, const TrainSettings& ts) {
    std::ostringstream os;
    os << q(bin) << " gen --preset " << r.preset << " --n-samples " << ts.samples
       << " --seed " << r.seed << " --out " << q(r.ds_dir) << " --force"
       << " > " << q(r.ds_dir + ".log") << " 2>&1";
    return os.str();
}

std::string train_cmd(const std::string& bin, const Run& r, const TrainSettings& ts) {
    std::ostringstream os;
    os << q(bin) << " train --data " << q(r.ds_dir) << " --out " << q(r.run_dir)
       << " --seed " << r.seed << " --set model.alpha=" << r.alpha
       << " --set model.beta=" << r.beta << " --set train.epochs=" << ts.epochs
       << " --force > " << q(r.run_dir + ".log") << " 2>&1";
    return os.str();
}

std::string eval_cmd(const std::string& bin, const Run& r) {
    std::ostringstream os;
    os << q(bin) << " eval --data " << q(r.ds_dir) << " --ckpt "
       << q(r.run_dir + "/checkpoint_best.json") << " --out " << q(r.eval_dir)
       << " --force > " << q(r.eval_dir + ".log") << " 2>&1";
    return os.str();
}

// Runs the whole schedule: datasets first (deduplicated), then train+eval per
// run. Any nonzero exit aborts with the log path so failures stay debuggable.
void execute_schedule(const std::string& bin, const std::string& scratch,
                      std::vector<Run>& runs, const TrainSettings& ts, int jobs) {
    std::map<std::string, Run*> datasets;
    for (Run& r : runs) {
        r.ds_dir = scratch + "/ds_" + r.preset + "_" + std::to_string(r.seed);
        std::ostringstream tag;
        tag << r.preset << "_s" << r.seed << "_a" << r.alpha << "_b" << r.beta;
        r.run_dir = scratch + "/run_" + tag.str();
        r.eval_dir = scratch + "/eval_" + tag.str();
        datasets.emplace(r.ds_dir, &r);
    }
    std::vector<std::string> gens;
    for (auto& [dir, r] : datasets)
        if (!std::filesystem::exists(dir + "/manifest.json"))
            gens.push_back(gen_cmd(bin, *r, ts));
    for (int s : run_pool(gens, jobs))
        if (s != 0) throw DataError("acceptance: dataset generation failed, see logs in " + scratch);

    std::vector<std::string> trains;
    for (const Run& r : runs)
        if (!std::filesystem::exists(r.run_dir + "/checkpoint_best.json"))
            trains.push_back(train_cmd(bin, r, ts));
    for (int s : run_pool(trains, jobs))
        if (s != 0) throw DataError("acceptance: a training run failed, see logs in " + scratch);

    std::vector<std::string> evals;
    for (const Run& r : runs)
        if (!std::filesystem::exists(r.eval_dir + "/sweep.json"))
            evals.push_back(eval_cmd(bin, r));
    for (int s : run_pool(evals, jobs))
        if (s != 0) throw DataError("acceptance: an evaluation failed, see logs in " + scratch);
}

// ---------------------------------------------------------------------------
// criteria 1-5: trained-pipeline quality
// ---------------------------------------------------------------------------

struct SweepSummary {
    double mcc = 0.0;
    double f1_inst_best = 0.0;
    std::vector<double> taus;
    std::vector<double> f1_delayed;
    std::vector<double> f1_inst;
};

SweepSummary load_sweep(const std::string& eval_dir) {
    const nlohmann::json j = read_json(eval_dir + "/sweep.json");
    SweepSummary s;
    s.mcc = j.at("mcc").get<double>();
    s.f1_inst_best = j.at("f1_inst_best").get<double>();
    for (const auto& row : j.at("sweep")) {
        s.taus.push_back(row.at("tau").get<double>());
        s.f1_delayed.push_back(row.at("f1_delayed").get<double>());
        s.f1_inst.push_back(row.at("f1_inst").get<double>());
    }
    return s;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <idol-binary> [scratch-dir]\n";
        return 64;
    }
    const std::string bin = argv[1];
    const std::string scratch = argc > 2 ? argv[2] : "accept_scratch";
    const int jobs = jobs_from_env();
    std::filesystem::create_directories(scratch);

    const std::vector<std::uint64_t> seeds = {769, 770, 771};
    const std::vector<std::pair<double, double>> grid = {
        {0.1, 0.1}, {0.1, 0.01}, {0.01, 0.1}, {0.01, 0.01}};
    const double kAlphaMain = 0.01;
    const double kBetaMain = 0.01;
    TrainSettings ts;

    try {
        // Schedule: full grid on preset A per seed, the main cell on presets
        // E (density comparison) and D (no instantaneous edges), and the
        // sparsity-off ablation on A.
        std::vector<Run> runs;
        const auto add_run = [&](const std::string& preset, std::uint64_t s,
                                 double a, double b) {
            Run r;
            r.preset = preset;
            r.seed = s;
            r.alpha = a;
            r.beta = b;
            runs.push_back(std::move(r));
        };
        for (const std::uint64_t s : seeds)
            for (const auto& [a, b] : grid) add_run("A", s, a, b);
        for (const std::uint64_t s : seeds) add_run("E", s, kAlphaMain, kBetaMain);
        add_run("D", seeds[0], kAlphaMain, kBetaMain);
        for (const std::uint64_t s : seeds) add_run("A", s, kAlphaMain, 0.0);
        execute_schedule(bin, scratch, runs, ts, jobs);

        const auto find_run = [&](const std::string& preset, std::uint64_t seed,
                                  double a, double b) -> const Run& {
            for (const Run& r : runs)
                if (r.preset == preset && r.seed == seed && r.alpha == a &&
                    r.beta == b)
                    return r;
            throw ContractError("acceptance: schedule lookup failed");
        };

        // Criterion 1: best grid cell on preset A, mean Pearson MCC >= 0.80.
        double best_cell_mean = -1.0;
        std::pair<double, double> best_cell = grid.front();
        for (const auto& [a, b] : grid) {
            std::vector<double> cell;
            for (const std::uint64_t s : seeds)
                cell.push_back(load_sweep(find_run("A", s, a, b).eval_dir).mcc);
            const double m = mean_of(cell);
            if (m > best_cell_mean) {
                best_cell_mean = m;
                best_cell = {a, b};
            }
        }
        {
            std::ostringstream d;
            d << "mean MCC " << best_cell_mean << " at alpha=" << best_cell.first
              << " beta=" << best_cell.second << " (need >= 0.80)";
            record("1 latent recovery on preset A", best_cell_mean >= 0.80, d.str());
        }

        // Criterion 2: sparse preset A beats dense preset E by >= 0.05 mean
        // MCC under the same budget and hyperparameters.
        {
            std::vector<double> a_mcc, e_mcc;
            for (const std::uint64_t s : seeds) {
                a_mcc.push_back(
                    load_sweep(find_run("A", s, kAlphaMain, kBetaMain).eval_dir).mcc);
                e_mcc.push_back(
                    load_sweep(find_run("E", s, kAlphaMain, kBetaMain).eval_dir).mcc);
            }
            const double gap = mean_of(a_mcc) - mean_of(e_mcc);
            std::ostringstream d;
            d << "mean MCC A " << mean_of(a_mcc) << " vs E " << mean_of(e_mcc)
              << ", gap " << gap << " (need >= 0.05)";
            record("2 sparse beats dense", gap >= 0.05, d.str());
        }

        // Criterion 3: preset D has no instantaneous edges; some threshold
        // must recover an empty instantaneous skeleton (F1 = 1 against the
        // empty truth) while keeping delayed F1 >= 0.8.
        {
            const SweepSummary s =
                load_sweep(find_run("D", seeds[0], kAlphaMain, kBetaMain).eval_dir);
            bool ok = false;
            double at_tau = -1.0, at_f1d = 0.0;
            for (std::size_t k = 0; k < s.taus.size(); ++k) {
                if (s.f1_inst[k] == 1.0 && s.f1_delayed[k] >= 0.8) {
                    ok = true;
                    at_tau = s.taus[k];
                    at_f1d = s.f1_delayed[k];
                    break;
                }
            }
            std::ostringstream d;
            if (ok)
                d << "tau " << at_tau << ": empty instantaneous skeleton, delayed F1 "
                  << at_f1d;
            else
                d << "no threshold gives empty instantaneous skeleton with delayed F1 >= 0.8";
            record("3 no instantaneous edges on preset D", ok, d.str());
        }

        // Criterion 4: on a best-cell preset-A run, some threshold nails both
        // supports exactly; orienting that skeleton with the exact oracle
        // recovers the chain z1 -> z2 -> z3.
        {
            const Run& r = find_run("A", seeds[0], best_cell.first, best_cell.second);
            const SweepSummary s = load_sweep(r.eval_dir);
            double tau_exact = -1.0;
            for (std::size_t k = 0; k < s.taus.size(); ++k)
                if (s.f1_delayed[k] == 1.0 && s.f1_inst[k] == 1.0) {
                    tau_exact = s.taus[k];
                    break;
                }
            bool ok = tau_exact > 0.0;
            std::string extra;
            if (ok) {
                // Reload the aligned mean sensitivities the evaluation saved,
                // rebuild the estimate at that threshold, and orient.
                const auto load_csv = [](const std::string& path) {
                    std::ifstream in(path);
                    if (!in) throw DataError("acceptance: cannot open " + path);
                    std::vector<std::vector<double>> rows;
                    std::string line;
                    while (std::getline(in, line)) {
                        std::vector<double> row;
                        std::stringstream ls(line);
                        std::string cell;
                        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
                        rows.push_back(std::move(row));
                    }
                    diff::Tensor t = diff::Tensor::zeros(
                        {static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
                    for (std::size_t i = 0; i < rows.size(); ++i)
                        for (std::size_t j = 0; j < rows[i].size(); ++j)
                            t.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
                    return t;
                };
                const diff::Tensor jd = load_csv(r.eval_dir + "/jacobian_delayed.csv");
                const diff::Tensor je = load_csv(r.eval_dir + "/jacobian_inst.csv");
                const auto truth = scm::GroundTruthGraph::from_spec(
                    scm::preset("A").process);
                const eval::GraphEstimate est =
                    eval::threshold_graph(jd, je, tau_exact);
                const eval::GraphEstimate g =
                    eval::orient(est, eval::exact_ci_oracle(truth));
                const bool chain = g.oriented_at(1, 0) && g.oriented_at(2, 1) &&
                                   !g.oriented_at(0, 1) && !g.oriented_at(1, 2) &&
                                   !g.skeleton_at(0, 2);
                ok = chain;
                std::ostringstream e;
                e << "tau " << tau_exact << " exact supports; chain "
                  << (chain ? "oriented z1->z2->z3" : "NOT recovered");
                extra = e.str();
            } else {
                extra = "no threshold reaches F1 = 1.0 on both supports";
            }
            record("4 graph recovery and orientation on preset A", ok, extra);
        }

        // Criterion 5: instantaneous-support F1 with the sparsity penalty on
        // is at least as good as with it off (mean of best-over-threshold).
        {
            std::vector<double> on, off;
            for (const std::uint64_t s : seeds) {
                on.push_back(load_sweep(find_run("A", s, kAlphaMain, kBetaMain).eval_dir)
                                 .f1_inst_best);
                off.push_back(
                    load_sweep(find_run("A", s, kAlphaMain, 0.0).eval_dir).f1_inst_best);
            }
            std::ostringstream d;
            d << "mean best inst F1 with penalty " << mean_of(on) << " vs without "
              << mean_of(off);
            record("5 sparsity penalty helps instantaneous support",
                   mean_of(on) >= mean_of(off), d.str());
        }
    } catch (const std::exception& e) {
        record("1-5 trained pipeline", false, std::string("aborted: ") + e.what());
    }

    // Criterion 6: with a hand-set linear coordinate map, the prior density
    // must equal the closed-form order-1 autoregressive Gaussian density.
    try {
        const double phi = 0.7;
        nn::ModelConfig mc;
        mc.n = 1;
        mc.d_x = 1;
        mc.seq_len = 5;
        mc.prior_depth = 0;
        mc.enc_width = 4;
        mc.dec_width = 4;
        nn::IdolModel<double> model(mc, 99);
        auto& net = model.prior_nets()[0];
        net.out.w.at(0, 0) = -phi; // previous-step coefficient
        net.out.w.at(1, 0) = 0.0;  // current coordinate rides the passthrough
        net.out.b.at(0, 0) = 0.0;

        util::Rng rng(4321, "ar1-check");
        double worst = 0.0;
        const double half_log_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);
        for (int trial = 0; trial < 1000; ++trial) {
            diff::Tensor window = diff::Tensor::zeros({mc.seq_len, 1});
            for (int t = 0; t < mc.seq_len; ++t)
                window.at(t, 0) = rng.normal(0.0, 1.5);
            const double got = model.prior_log_prob(window);
            double want = -half_log_2pi - 0.5 * window.at(0, 0) * window.at(0, 0);
            for (int t = 1; t < mc.seq_len; ++t) {
                const double eps = window.at(t, 0) - phi * window.at(t - 1, 0);
                want += -half_log_2pi - 0.5 * eps * eps;
            }
            worst = std::max(worst, std::abs(got - want));
        }
        std::ostringstream d;
        d << "max abs deviation " << worst << " over 1000 windows (need <= 1e-8)";
        record("6 prior density matches closed form", worst <= 1e-8, d.str());
    } catch (const std::exception& e) {
        record("6 prior density matches closed form", false,
               std::string("exception: ") + e.what());
    }

    // Criterion 7: parameter gradients of the full loss on a tiny model
    // against central differences, including the sparsity term's path
    // through the per-row input gradients.
    try {
        nn::ModelConfig mc;
        mc.n = 2;
        mc.d_x = 2;
        mc.seq_len = 2;
        mc.alpha = 0.3;
        mc.beta = 0.2;
        mc.enc_width = 6;
        mc.dec_width = 6;
        mc.prior_width = 4;
        mc.prior_depth = 1;
        nn::IdolModel<double> model(mc, 7);

        const int batch = 3;
        util::Rng data_rng(100, "grad-data");
        diff::Tensor x = diff::Tensor::zeros({batch * mc.seq_len, mc.d_x});
        for (auto& v : x.data()) v = data_rng.normal();

        // One fixed noise draw so the loss is a deterministic function of
        // the parameters.
        auto params = model.parameters();
        double worst = 0.0;
        std::string worst_param;
        for (auto& p : params) {
            diff::Tensor& theta = *p.tensor;
            for (std::size_t idx = 0; idx < theta.numel(); ++idx) {
                const auto loss_value = [&]() {
                    util::Rng noise(555, "grad-noise");
                    return model.loss(x, batch, noise).total_value;
                };
                auto tape = diff::Tape::create();
                for (auto& pp : params) tape->watch(*pp.tensor);
                util::Rng noise(555, "grad-noise");
                auto out = model.loss(x, batch, noise);
                tape->backward(out.total);
                const double analytic = tape->grad(theta).data()[idx];
                model.detach_state();

                const double orig = theta.data()[idx];
                const double h = 1e-5;
                theta.data()[idx] = orig + h;
                const double fp = loss_value();
                theta.data()[idx] = orig - h;
                const double fm = loss_value();
                theta.data()[idx] = orig;
                const double fd = (fp - fm) / (2.0 * h);
                const double rel = diff::relative_error(analytic, fd);
                if (rel > worst) {
                    worst = rel;
                    worst_param = p.name + "[" + std::to_string(idx) + "]";
                }
            }
        }
        std::ostringstream d;
        d << "worst rel err " << worst << " at " << worst_param
          << " (need <= 1e-4)";
        record("7 loss gradients match finite differences", worst <= 1e-4, d.str());
    } catch (const std::exception& e) {
        record("7 loss gradients match finite differences", false,
               std::string("exception: ") + e.what());
    }

    // Criterion 8: closed-book oracles. Assignment against exhaustive search,
    // graph separation against path enumeration, the process step against a
    // hand-computed example.
    try {
        bool ok = true;
        std::ostringstream d;

        // Assignment: exhaustive maximum with lexicographic tie handling.
        util::Rng rng(2024, "accept-assign");
        int assign_bad = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 2 + static_cast<int>(rng.below(5));
            diff::Tensor score = diff::Tensor::zeros({n, n});
            for (auto& v : score.data())
                v = trial % 4 == 3 ? std::floor(rng.uniform(0.0, 3.0))
                                   : rng.uniform(0.0, 1.0);
            const eval::Assignment got = eval::optimal_assignment(score);

            std::vector<int> perm(static_cast<std::size_t>(n));
            std::iota(perm.begin(), perm.end(), 0);
            double best_total = -1.0;
            do {
                double t = 0.0;
                for (int i = 0; i < n; ++i) t += score.at(i, perm[static_cast<std::size_t>(i)]);
                if (t > best_total) best_total = t;
            } while (std::next_permutation(perm.begin(), perm.end()));
            const double eps = 1e-11 * std::max(1.0, std::abs(best_total));
            std::iota(perm.begin(), perm.end(), 0);
            std::vector<int> want;
            do {
                double t = 0.0;
                for (int i = 0; i < n; ++i) t += score.at(i, perm[static_cast<std::size_t>(i)]);
                if (t >= best_total - eps) {
                    want = perm;
                    break;
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
            if (got.perm != want || std::abs(got.total - best_total) > 1e-9) ++assign_bad;
        }
        if (assign_bad) ok = false;
        d << "assignment mismatches " << assign_bad << "/100";

        // Separation queries against brute-force path enumeration.
        util::Rng drng(77, "accept-dsep");
        int dsep_bad = 0;
        for (int g = 0; g < 50; ++g) {
            const scm::Dag dag = oracles::random_dag(drng, 6, 0.35);
            for (int a = 0; a < 6; ++a) {
                for (int b = a + 1; b < 6; ++b) {
                    for (const auto& cond : oracles::conditioning_sets(6, a, b)) {
                        const std::vector<int> z(cond.begin(), cond.end());
                        if (eval::dsep(dag, a, b, z) !=
                            oracles::dsep_bruteforce(dag, a, b, cond))
                            ++dsep_bad;
                    }
                }
            }
        }
        if (dsep_bad) ok = false;
        d << "; separation mismatches " << dsep_bad;

        // Hand-evaluated process step.
        const std::vector<double> zout =
            scm::step({1.0, 2.0, -1.0}, {0.5, -0.5, 1.0}, scm::preset("A").process);
        const std::vector<double> want = {2.0, -2.5, -1.7};
        double step_err = 0.0;
        for (int i = 0; i < 3; ++i)
            step_err = std::max(step_err, std::abs(zout[i] - want[i]));
        if (step_err > 1e-12) ok = false;
        d << "; step worked-example err " << step_err;

        record("8 oracle equivalences", ok, d.str());
    } catch (const std::exception& e) {
        record("8 oracle equivalences", false, std::string("exception: ") + e.what());
    }

    // Criterion 9: structural guarantees. Observation map invertibility, the
    // triangular zero pattern of the same-step sensitivities, and the
    // neighborhood-based sparsity check on known graphs.
    try {
        bool ok = true;
        std::ostringstream d;

        // Mixing round trip.
        const scm::MixingSpec mixing = scm::make_random_mixing(5, 2, 31337);
        util::Rng mrng(5150, "accept-mix");
        double round_err = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> z(5);
            for (auto& v : z) v = mrng.normal(0.0, 3.0);
            const std::vector<double> back = scm::unmix(scm::mix(z, mixing), mixing);
            for (int i = 0; i < 5; ++i)
                round_err = std::max(round_err, std::abs(back[i] - z[i]));
        }
        if (round_err > 1e-8) ok = false;
        d << "mix/unmix round-trip err " << round_err;

        // Strict upper triangle of the same-step sensitivities is exactly
        // zero by construction, even on a freshly randomized model.
        nn::ModelConfig mc;
        mc.n = 4;
        mc.d_x = 4;
        mc.seq_len = 3;
        mc.enc_width = 8;
        mc.dec_width = 8;
        mc.prior_width = 6;
        mc.prior_depth = 2;
        nn::IdolModel<double> model(mc, 17);
        util::Rng prng(88, "accept-je");
        for (auto& net : model.prior_nets())
            for (auto& v : net.out.w.data()) v = prng.uniform(-1.0, 1.0);
        diff::Tensor zprev = diff::Tensor::zeros({1, 4});
        diff::Tensor zcur = diff::Tensor::zeros({1, 4});
        for (int i = 0; i < 4; ++i) {
            zprev.at(0, i) = prng.normal();
            zcur.at(0, i) = prng.normal();
        }
        const auto [jd, je] = model.jacobians(zprev, zcur);
        double upper = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                upper = std::max(upper, std::abs(je.at(i, j)));
        if (upper != 0.0) ok = false;
        d << "; same-step strict upper max " << upper;

        // Triangle: the first node's intimate neighborhood is the other two
        // corners, and a fully instantaneous triangle process violates the
        // sparsity condition at every node.
        scm::UndirectedGraph triangle(3);
        triangle.add_edge(0, 1);
        triangle.add_edge(1, 2);
        triangle.add_edge(0, 2);
        const std::vector<int> tri_set = scm::intimate_set(triangle, 0);
        if (tri_set != std::vector<int>{1, 2}) ok = false;

        scm::LatentProcessSpec tri_spec;
        tri_spec.n = 3;
        tri_spec.w.assign(9, 0.0);
        tri_spec.v.assign(9, 0.0);
        tri_spec.v[1 * 3 + 0] = 1.0;
        tri_spec.v[2 * 3 + 0] = 1.0;
        tri_spec.v[2 * 3 + 1] = 1.0;
        const auto tri_truth = scm::GroundTruthGraph::from_spec(tri_spec);
        const scm::SparsityReport tri_rep =
            scm::check_sparse_process(tri_truth, scm::moral_graph(tri_truth, 1));
        bool tri_ok = !tri_rep.satisfied;
        for (const auto c : tri_rep.per_node)
            if (c != scm::SparsityCase::kViolated) tri_ok = false;
        if (!tri_ok) ok = false;
        d << "; triangle case "
          << (tri_ok && tri_set == std::vector<int>{1, 2} ? "violated as expected"
                                                          : "WRONG");

        // Preset A window: all intimate sets empty, condition satisfied.
        const auto truth_a = scm::GroundTruthGraph::from_spec(scm::preset("A").process);
        const scm::SparsityReport rep_a =
            scm::check_sparse_process(truth_a, scm::moral_graph(truth_a, 3));
        bool a_ok = rep_a.satisfied;
        for (const auto c : rep_a.per_node)
            if (c != scm::SparsityCase::kEmptySet) a_ok = false;
        if (!a_ok) ok = false;
        d << "; preset A window " << (a_ok ? "satisfied" : "NOT satisfied");

        record("9 structural checks", ok, d.str());
    } catch (const std::exception& e) {
        record("9 structural checks", false, std::string("exception: ") + e.what());
    }

    // Criterion 10: byte-level determinism of the 64-bit single-thread path.
    try {
        const std::string d1 = scratch + "/det_a";
        const std::string d2 = scratch + "/det_b";
        std::vector<std::string> cmds;
        for (const std::string& d : {d1, d2}) {
            std::ostringstream os;
            os << q(bin) << " gen --preset A --n-samples 200 --seed 4242 --out "
               << q(d + "/ds") << " --force > /dev/null 2>&1 && " << q(bin)
               << " train --data " << q(d + "/ds") << " --out " << q(d + "/run")
               << " --seed 4242 --set train.precision=f64 --set train.epochs=3"
               << " --set model.enc_width=16 --set model.dec_width=16"
               << " --set model.prior_width=8 --set model.prior_depth=1"
               << " --force > /dev/null 2>&1 && " << q(bin) << " eval --data "
               << q(d + "/ds") << " --ckpt " << q(d + "/run/checkpoint_best.json")
               << " --out " << q(d + "/eval") << " --force > /dev/null 2>&1";
            cmds.push_back(os.str());
        }
        // Serial on purpose: determinism must not depend on scheduling.
        bool ran = true;
        for (const std::string& c : cmds)
            if (std::system(c.c_str()) != 0) ran = false;
        bool ok = ran;
        std::string diff_at = ran ? "" : "pipeline invocation failed";
        if (ran) {
            const std::vector<std::string> files = {
                "/ds/x.bin",          "/ds/z.bin",
                "/ds/manifest.json",  "/run/checkpoint_best.json",
                "/run/checkpoint_last.json", "/run/history.csv",
                "/eval/metrics.json", "/eval/sweep.json"};
            for (const std::string& f : files) {
                if (read_file(d1 + f) != read_file(d2 + f)) {
                    ok = false;
                    diff_at += (diff_at.empty() ? "differs: " : ", ") + f;
                }
            }
        }
        record("10 bitwise determinism", ok,
               ok ? "datasets, checkpoints, and metrics byte-identical"
                  : diff_at);
    } catch (const std::exception& e) {
        record("10 bitwise determinism", false, std::string("exception: ") + e.what());
    }

    int failures = 0;
    for (const Criterion& c : g_results)
        if (!c.pass) ++failures;
    std::cout << (failures == 0 ? "ALL CRITERIA PASSED"
                                : std::to_string(failures) + " CRITERIA FAILED")
              << std::endl;
    return failures;
}
