// Command line front end: dataset generation, training, evaluation, graph
// orientation, and cross-run reporting. Every subcommand echoes its fully
// resolved configuration into the output directory so runs stay reproducible
// from their artifacts alone.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "idol/eval/graph_recover.hpp"
#include "idol/eval/jacobians.hpp"
#include "idol/eval/metrics.hpp"
#include "idol/nn/idol_model.hpp"
#include "idol/scm/dataset.hpp"
#include "idol/scm/graphs.hpp"
#include "idol/scm/mixing.hpp"
#include "idol/scm/presets.hpp"
#include "idol/scm/process.hpp"
#include "idol/train/adam.hpp"
#include "idol/train/checkpoint.hpp"
#include "idol/train/trainer.hpp"
#include "idol/util/binio.hpp"
#include "idol/util/errors.hpp"
#include "idol/util/hash.hpp"
#include "idol/util/keyval.hpp"
#include "idol/util/log.hpp"

namespace {

using namespace idol;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trimmed(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

// Union of every tunable key across the subcommands. Each command reads the
// whole set so a single config file can drive gen, train, and eval without
// tripping the unknown-key check; typos still get rejected.
struct RunConfig {
    std::uint64_t seed = 769;

    std::string gen_preset = "A";
    std::string gen_spec_file; // JSON process description, overrides preset
    int gen_samples = 10000;
    int gen_seq_len = 5;
    int gen_burn_in = 20;
    int gen_val_count = -1; // -1: pick a default from the sample count
    int gen_mix_depth = 2;

    nn::ModelConfig model;              // n/d_x/seq_len resolved from data
    int model_n = -1;                   // -1: match the data dimension
    std::string model_mode = "reconstruct";

    train::TrainConfig train; // seed/out_dir resolved at dispatch time
    std::string train_precision = "f32";

    std::string eval_method = "pearson";
    double eval_tau = 0.1;
    int eval_tau_points = 20;
    double eval_alpha_level = 0.01;
    std::string eval_oracle = "exact";
};

struct KeyDoc {
    const char* key;
    const char* doc;
};

constexpr KeyDoc kKeyDocs[] = {
    {"seed", "root seed; every random stream is derived from it by label"},
    {"gen.preset", "named generating process (A..F), ignored when gen.spec is set"},
    {"gen.spec", "path to a JSON process description with keys n, w, v (optional lag, L, noise_std, slope)"},
    {"gen.samples", "number of sequences to generate"},
    {"gen.seq_len", "timesteps per sequence"},
    {"gen.burn_in", "initial steps discarded from each sequence"},
    {"gen.val_count", "sequences reserved for validation, -1 picks a default"},
    {"gen.mix_depth", "layers in the random observation map"},
    {"model.n", "latent dimension, -1 matches the data dimension"},
    {"model.alpha", "weight on the divergence-from-prior term"},
    {"model.beta", "weight on the transition sparsity penalty"},
    {"model.recon_std", "observation noise scale used by the reconstruction term"},
    {"model.slope", "negative-side slope of the leaky rectifier activations"},
    {"model.enc_width", "encoder hidden width"},
    {"model.enc_depth", "encoder hidden layers"},
    {"model.dec_width", "decoder hidden width"},
    {"model.dec_depth", "decoder hidden layers"},
    {"model.prior_width", "transition network hidden width"},
    {"model.prior_depth", "transition network hidden layers"},
    {"model.penalize_diagonal", "include self-edges in the sparsity penalty"},
    {"model.mode", "reconstruct or forecast"},
    {"model.forecast_split", "first forecast step when mode=forecast"},
    {"train.epochs", "optimization epochs"},
    {"train.batch", "sequences per optimizer step"},
    {"train.lr", "Adam learning rate"},
    {"train.grad_clip", "joint gradient norm ceiling, <= 0 disables"},
    {"train.standardize", "normalize observations with training-split statistics"},
    {"train.checkpoint_every", "extra checkpoint every k epochs, 0 = off"},
    {"train.resume_from", "checkpoint path to resume from"},
    {"train.precision", "f32 or f64 model arithmetic"},
    {"eval.method", "correlation for latent matching: pearson or spearman"},
    {"eval.tau", "relative threshold used by the graph command"},
    {"eval.tau_points", "thresholds tried in the evaluation sweep"},
    {"eval.alpha_level", "significance level for the data-driven independence tests"},
    {"eval.oracle", "independence oracle for orientation: exact or partialcorr"},
};

RunConfig read_config(const util::KeyVal& kv) {
    RunConfig rc;
    rc.seed = static_cast<std::uint64_t>(
        kv.get_int("seed", static_cast<std::int64_t>(rc.seed)));

    rc.gen_preset = kv.get_string("gen.preset", rc.gen_preset);
    rc.gen_spec_file = kv.get_string("gen.spec", rc.gen_spec_file);
    rc.gen_samples = static_cast<int>(kv.get_int("gen.samples", rc.gen_samples));
    rc.gen_seq_len = static_cast<int>(kv.get_int("gen.seq_len", rc.gen_seq_len));
    rc.gen_burn_in = static_cast<int>(kv.get_int("gen.burn_in", rc.gen_burn_in));
    rc.gen_val_count =
        static_cast<int>(kv.get_int("gen.val_count", rc.gen_val_count));
    rc.gen_mix_depth =
        static_cast<int>(kv.get_int("gen.mix_depth", rc.gen_mix_depth));

    rc.model_n = static_cast<int>(kv.get_int("model.n", rc.model_n));
    rc.model.alpha = kv.get_double("model.alpha", rc.model.alpha);
    rc.model.beta = kv.get_double("model.beta", rc.model.beta);
    rc.model.recon_std = kv.get_double("model.recon_std", rc.model.recon_std);
    rc.model.slope = kv.get_double("model.slope", rc.model.slope);
    rc.model.enc_width =
        static_cast<int>(kv.get_int("model.enc_width", rc.model.enc_width));
    rc.model.enc_depth =
        static_cast<int>(kv.get_int("model.enc_depth", rc.model.enc_depth));
    rc.model.dec_width =
        static_cast<int>(kv.get_int("model.dec_width", rc.model.dec_width));
    rc.model.dec_depth =
        static_cast<int>(kv.get_int("model.dec_depth", rc.model.dec_depth));
    rc.model.prior_width =
        static_cast<int>(kv.get_int("model.prior_width", rc.model.prior_width));
    rc.model.prior_depth =
        static_cast<int>(kv.get_int("model.prior_depth", rc.model.prior_depth));
    rc.model.penalize_diagonal =
        kv.get_bool("model.penalize_diagonal", rc.model.penalize_diagonal);
    rc.model_mode = kv.get_string("model.mode", rc.model_mode);
    if (rc.model_mode != "reconstruct" && rc.model_mode != "forecast")
        throw ConfigError("model.mode must be 'reconstruct' or 'forecast', got '" +
                          rc.model_mode + "'");
    rc.model.forecast_split = static_cast<int>(
        kv.get_int("model.forecast_split", rc.model.forecast_split));

    rc.train.epochs = static_cast<int>(kv.get_int("train.epochs", rc.train.epochs));
    rc.train.batch = static_cast<int>(kv.get_int("train.batch", rc.train.batch));
    rc.train.lr = kv.get_double("train.lr", rc.train.lr);
    rc.train.grad_clip = kv.get_double("train.grad_clip", rc.train.grad_clip);
    rc.train.standardize = kv.get_bool("train.standardize", rc.train.standardize);
    rc.train.checkpoint_every = static_cast<int>(
        kv.get_int("train.checkpoint_every", rc.train.checkpoint_every));
    rc.train.resume_from = kv.get_string("train.resume_from", rc.train.resume_from);
    rc.train_precision = kv.get_string("train.precision", rc.train_precision);
    if (rc.train_precision != "f32" && rc.train_precision != "f64")
        throw ConfigError("train.precision must be 'f32' or 'f64', got '" +
                          rc.train_precision + "'");

    rc.eval_method = kv.get_string("eval.method", rc.eval_method);
    if (rc.eval_method != "pearson" && rc.eval_method != "spearman")
        throw ConfigError("eval.method must be 'pearson' or 'spearman', got '" +
                          rc.eval_method + "'");
    rc.eval_tau = kv.get_double("eval.tau", rc.eval_tau);
    rc.eval_tau_points =
        static_cast<int>(kv.get_int("eval.tau_points", rc.eval_tau_points));
    if (rc.eval_tau_points < 1)
        throw ConfigError("eval.tau_points must be >= 1");
    rc.eval_alpha_level = kv.get_double("eval.alpha_level", rc.eval_alpha_level);
    rc.eval_oracle = kv.get_string("eval.oracle", rc.eval_oracle);
    if (rc.eval_oracle != "exact" && rc.eval_oracle != "partialcorr")
        throw ConfigError("eval.oracle must be 'exact' or 'partialcorr', got '" +
                          rc.eval_oracle + "'");

    kv.reject_unknown();
    return rc;
}

std::string config_value(const RunConfig& rc, const std::string& key) {
    if (key == "seed") return std::to_string(rc.seed);
    if (key == "gen.preset") return rc.gen_preset;
    if (key == "gen.spec") return rc.gen_spec_file;
    if (key == "gen.samples") return std::to_string(rc.gen_samples);
    if (key == "gen.seq_len") return std::to_string(rc.gen_seq_len);
    if (key == "gen.burn_in") return std::to_string(rc.gen_burn_in);
    if (key == "gen.val_count") return std::to_string(rc.gen_val_count);
    if (key == "gen.mix_depth") return std::to_string(rc.gen_mix_depth);
    if (key == "model.n") return std::to_string(rc.model_n);
    if (key == "model.alpha") return fmt_double(rc.model.alpha);
    if (key == "model.beta") return fmt_double(rc.model.beta);
    if (key == "model.recon_std") return fmt_double(rc.model.recon_std);
    if (key == "model.slope") return fmt_double(rc.model.slope);
    if (key == "model.enc_width") return std::to_string(rc.model.enc_width);
    if (key == "model.enc_depth") return std::to_string(rc.model.enc_depth);
    if (key == "model.dec_width") return std::to_string(rc.model.dec_width);
    if (key == "model.dec_depth") return std::to_string(rc.model.dec_depth);
    if (key == "model.prior_width") return std::to_string(rc.model.prior_width);
    if (key == "model.prior_depth") return std::to_string(rc.model.prior_depth);
    if (key == "model.penalize_diagonal")
        return rc.model.penalize_diagonal ? "true" : "false";
    if (key == "model.mode") return rc.model_mode;
    if (key == "model.forecast_split") return std::to_string(rc.model.forecast_split);
    if (key == "train.epochs") return std::to_string(rc.train.epochs);
    if (key == "train.batch") return std::to_string(rc.train.batch);
    if (key == "train.lr") return fmt_double(rc.train.lr);
    if (key == "train.grad_clip") return fmt_double(rc.train.grad_clip);
    if (key == "train.standardize") return rc.train.standardize ? "true" : "false";
    if (key == "train.checkpoint_every")
        return std::to_string(rc.train.checkpoint_every);
    if (key == "train.resume_from") return rc.train.resume_from;
    if (key == "train.precision") return rc.train_precision;
    if (key == "eval.method") return rc.eval_method;
    if (key == "eval.tau") return fmt_double(rc.eval_tau);
    if (key == "eval.tau_points") return std::to_string(rc.eval_tau_points);
    if (key == "eval.alpha_level") return fmt_double(rc.eval_alpha_level);
    if (key == "eval.oracle") return rc.eval_oracle;
    throw ContractError("config_value: unhandled key " + key);
}

util::KeyVal effective_config(const RunConfig& rc) {
    util::KeyVal kv;
    for (const auto& kd : kKeyDocs) kv.set(kd.key, config_value(rc, kd.key));
    return kv;
}

std::string config_key_help() {
    const RunConfig d;
    std::ostringstream os;
    os << "Configuration keys (config file 'key = value' lines or --set key=value,\n"
          "--set wins over the file, command line flags win over both):\n";
    for (const auto& kd : kKeyDocs) {
        std::string def = config_value(d, kd.key);
        if (def.empty()) def = "(empty)";
        os << "  " << kd.key << " = " << def << "\n      " << kd.doc << "\n";
    }
    return os.str();
}

void apply_sets(util::KeyVal& kv, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto pos = s.find('=');
        if (pos == std::string::npos || trimmed(s.substr(0, pos)).empty())
            throw ConfigError("--set expects key=value, got '" + s + "'");
        kv.set(trimmed(s.substr(0, pos)), trimmed(s.substr(pos + 1)));
    }
}

// Refuses to scribble over a directory with prior contents unless forced.
void claim_out_dir(const std::string& out, bool force) {
    if (out.empty()) throw ConfigError("an output directory is required (--out)");
    if (!force && !util::dir_is_empty_or_missing(out))
        throw ConfigError("output directory '" + out +
                          "' already has contents; pass --force to overwrite");
    util::ensure_dir(out);
}

// Writes the resolved configuration into the run directory and returns its
// hash, which training stamps into every checkpoint.
std::string write_config_echo(const RunConfig& rc, const std::string& out_dir) {
    const util::KeyVal kv = effective_config(rc);
    util::write_text_file(out_dir + "/config.txt", kv.canonical_text());
    return kv.config_hash();
}

void write_matrix_csv(const std::string& path, const diff::Tensor& m) {
    std::ostringstream os;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) os << ",";
            os << fmt_double(m.at(i, j));
        }
        os << "\n";
    }
    util::write_text_file(path, os.str());
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

scm::LatentProcessSpec load_spec_file(const std::string& path, int fallback_seq_len) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(util::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("process spec " + path + ": " + e.what());
    }
    scm::LatentProcessSpec spec;
    try {
        spec.n = j.at("n").get<int>();
        spec.w = j.at("w").get<std::vector<double>>();
        spec.v = j.at("v").get<std::vector<double>>();
        spec.lag = j.value("lag", spec.lag);
        spec.seq_len = j.value("L", fallback_seq_len);
        spec.noise_std = j.value("noise_std", spec.noise_std);
        spec.slope = j.value("slope", spec.slope);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("process spec " + path + ": missing or mistyped field (" +
                        std::string(e.what()) + ")");
    }
    spec.validate();
    return spec;
}

int cmd_gen(const util::KeyVal& kv, const std::string& out, bool force, int threads) {
    const RunConfig rc = read_config(kv);

    scm::LatentProcessSpec spec;
    std::string preset_name;
    if (!rc.gen_spec_file.empty()) {
        spec = load_spec_file(rc.gen_spec_file, rc.gen_seq_len);
    } else {
        spec = scm::preset(rc.gen_preset).process;
        spec.seq_len = rc.gen_seq_len;
        spec.validate();
        preset_name = rc.gen_preset;
    }
    const scm::MixingSpec mixing =
        scm::make_random_mixing(spec.n, rc.gen_mix_depth, rc.seed);

    claim_out_dir(out, force);
    scm::Dataset ds = scm::generate(spec, mixing, rc.gen_samples, rc.gen_burn_in,
                                    rc.seed, rc.gen_val_count, threads);
    ds.preset_name = preset_name;
    scm::save_dataset(ds, out);

    const auto truth = scm::GroundTruthGraph::from_spec(spec);
    util::write_text_file(out + "/truth.dot", scm::ground_truth_dot(truth));

    // Structural check of the generating process: does each variable become
    // independent of the future given a small neighborhood? Recorded next to
    // the data so downstream users know what recovery can promise.
    const scm::MarkovNet net = scm::moral_graph(truth, 3);
    const scm::SparsityReport report = scm::check_sparse_process(truth, net);
    const std::string report_text = report.to_string(net);
    util::write_text_file(out + "/sparsity_report.txt", report_text);
    std::cout << report_text;

    write_config_echo(rc, out);
    util::log_info("gen: wrote ", ds.num_sequences, " sequences (n=", ds.n(),
                   ", L=", ds.seq_len(), ") to ", out);
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

nn::ModelConfig make_model_config(const RunConfig& rc, const scm::Dataset& ds) {
    nn::ModelConfig mc = rc.model;
    mc.n = rc.model_n > 0 ? rc.model_n : ds.n();
    mc.d_x = ds.n();
    mc.seq_len = ds.seq_len();
    mc.mode = rc.model_mode == "forecast" ? nn::ModelConfig::Mode::kForecast
                                          : nn::ModelConfig::Mode::kReconstruct;
    mc.validate();
    return mc;
}

template <class S>
int run_train(const RunConfig& rc, const nn::ModelConfig& mc,
              const scm::Dataset& ds, const train::TrainConfig& tc,
              const std::string& hash) {
    nn::IdolModel<S> model(mc, rc.seed);
    train::Trainer<S> trainer(model, ds, tc, hash);
    const train::TrainResult res = trainer.run();
    std::cout << "epochs_run=" << res.epochs_run << " best_epoch=" << res.best_epoch
              << " best_val=" << fmt_double(res.best_val) << "\n"
              << "best_checkpoint=" << res.best_path << "\n"
              << "last_checkpoint=" << res.last_path << "\n";
    return 0;
}

int cmd_train(const util::KeyVal& kv, const std::string& data,
              const std::string& out, bool force) {
    const RunConfig rc = read_config(kv);
    const scm::Dataset ds = scm::load_dataset(data);
    const nn::ModelConfig mc = make_model_config(rc, ds);

    train::TrainConfig tc = rc.train;
    tc.seed = rc.seed;
    tc.out_dir = out;
    // Resuming writes into the same directory on purpose; a fresh run still
    // has to claim it.
    if (tc.resume_from.empty()) {
        claim_out_dir(out, force);
    } else {
        util::ensure_dir(out);
    }
    const std::string hash = write_config_echo(rc, out);

    if (rc.train_precision == "f64") return run_train<double>(rc, mc, ds, tc, hash);
    return run_train<float>(rc, mc, ds, tc, hash);
}

// ---------------------------------------------------------------------------
// checkpoint loading shared by eval and graph
// ---------------------------------------------------------------------------

struct EvalProducts {
    train::CheckpointMeta meta;
    diff::Tensor corr;         // |correlation|, true rows x estimated cols
    eval::Assignment assign;   // estimated index for each true coordinate
    double mcc = 0.0;
    diff::Tensor jd_aligned;   // mean |transition sensitivities|, true order
    diff::Tensor je_aligned;
    diff::Tensor zhat;         // validation latent means, estimated order
};

template <class S>
EvalProducts compute_products(const nn::ModelConfig& mc, const std::string& ckpt,
                              const scm::Dataset& ds, eval::CorrMethod method,
                              int threads) {
    nn::IdolModel<S> model(mc, 0);
    auto params = model.parameters();
    train::Adam<S> adam(params, train::AdamConfig{});
    auto state = model.state();
    for (auto& m : adam.moment_state()) state.push_back(m);

    EvalProducts p;
    p.meta = train::load_checkpoint<S>(ckpt, state);

    const eval::LatentExtract lat = eval::extract_latents(model, ds);
    p.zhat = lat.zhat;
    p.corr = eval::correlation_matrix(lat.ztrue, lat.zhat, method);
    p.assign = eval::optimal_assignment(p.corr);
    p.mcc = p.assign.total / static_cast<double>(p.corr.rows());

    auto [jd, je] = eval::extract_mean_jacobians(model, ds, threads);
    p.jd_aligned = eval::align_matrix(jd, p.assign.perm);
    p.je_aligned = eval::align_matrix(je, p.assign.perm);
    return p;
}

EvalProducts load_and_evaluate(const RunConfig& rc, const nn::ModelConfig& mc,
                               const std::string& ckpt, const scm::Dataset& ds,
                               int threads) {
    if (mc.n != ds.n())
        throw ConfigError(
            "latent matching needs model.n equal to the data dimension; got " +
            std::to_string(mc.n) + " vs " + std::to_string(ds.n()));
    const eval::CorrMethod method = rc.eval_method == "spearman"
                                        ? eval::CorrMethod::kSpearman
                                        : eval::CorrMethod::kPearson;
    if (rc.train_precision == "f64")
        return compute_products<double>(mc, ckpt, ds, method, threads);
    return compute_products<float>(mc, ckpt, ds, method, threads);
}

// Locates the configuration for a checkpoint: an explicit --config wins,
// otherwise the config.txt the training run left next to the checkpoint.
util::KeyVal checkpoint_config(const std::string& explicit_cfg,
                               const std::string& ckpt,
                               const std::vector<std::string>& sets) {
    std::string path = explicit_cfg;
    if (path.empty()) {
        path = (std::filesystem::path(ckpt).parent_path() / "config.txt").string();
        if (!std::filesystem::exists(path))
            throw DataError("no config.txt next to checkpoint " + ckpt +
                            "; pass --config explicitly");
    }
    util::KeyVal kv = util::KeyVal::parse_file(path);
    apply_sets(kv, sets);
    return kv;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const util::KeyVal& kv, const std::string& data,
             const std::string& ckpt, const std::string& out, bool force,
             int threads) {
    const RunConfig rc = read_config(kv);
    const scm::Dataset ds = scm::load_dataset(data);
    const nn::ModelConfig mc = make_model_config(rc, ds);
    const EvalProducts p = load_and_evaluate(rc, mc, ckpt, ds, threads);
    const auto truth = scm::GroundTruthGraph::from_spec(ds.spec);

    struct SweepPoint {
        double tau;
        eval::Metrics m;
    };
    std::vector<SweepPoint> sweep;
    sweep.reserve(rc.eval_tau_points);
    std::size_t best = 0;
    double best_score = -1.0;
    for (int k = 1; k <= rc.eval_tau_points; ++k) {
        const double tau = static_cast<double>(k) / rc.eval_tau_points;
        const eval::GraphEstimate est =
            eval::threshold_graph(p.jd_aligned, p.je_aligned, tau);
        eval::Metrics m = eval::graph_metrics(est, truth);
        m.mcc = p.mcc;
        const double score = m.f1_delayed + m.f1_inst;
        if (score > best_score + 1e-12) {
            best_score = score;
            best = sweep.size();
        }
        sweep.push_back({tau, m});
    }

    claim_out_dir(out, force);
    write_config_echo(rc, out);

    const SweepPoint& bp = sweep[best];
    const std::string metrics =
        eval::metrics_json(bp.m, bp.tau, p.meta.seed, p.meta.config_hash);
    util::write_text_file(out + "/metrics.json", metrics);
    std::cout << metrics;

    write_matrix_csv(out + "/correlation.csv", p.corr);
    write_matrix_csv(out + "/jacobian_delayed.csv", p.jd_aligned);
    write_matrix_csv(out + "/jacobian_inst.csv", p.je_aligned);

    const eval::GraphEstimate best_est =
        eval::threshold_graph(p.jd_aligned, p.je_aligned, bp.tau);
    util::write_text_file(out + "/graph.dot", eval::graph_estimate_dot(best_est));

    double f1_inst_best = 0.0;
    double f1_delayed_best = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (const SweepPoint& sp : sweep) {
        f1_inst_best = std::max(f1_inst_best, sp.m.f1_inst);
        f1_delayed_best = std::max(f1_delayed_best, sp.m.f1_delayed);
        rows.push_back({{"tau", sp.tau},
                        {"f1_delayed", sp.m.f1_delayed},
                        {"f1_inst", sp.m.f1_inst},
                        {"shd", sp.m.shd}});
    }
    nlohmann::json sj;
    sj["dataset"] = ds.preset_name.empty() ? "custom" : ds.preset_name;
    sj["method"] = mc.beta == 0.0 ? "idol-nosparsity" : "idol";
    sj["corr"] = rc.eval_method;
    sj["seed"] = p.meta.seed;
    sj["config_hash"] = p.meta.config_hash;
    sj["mcc"] = p.mcc;
    sj["assignment"] = p.assign.perm;
    sj["best_tau"] = bp.tau;
    sj["f1_delayed"] = bp.m.f1_delayed;
    sj["f1_inst"] = bp.m.f1_inst;
    sj["shd"] = bp.m.shd;
    sj["f1_delayed_best"] = f1_delayed_best;
    sj["f1_inst_best"] = f1_inst_best;
    sj["sweep"] = rows;
    util::write_text_file(out + "/sweep.json", sj.dump(2) + "\n");

    util::log_info("eval: mcc=", p.mcc, " best_tau=", bp.tau, " -> ", out);
    return 0;
}

// ---------------------------------------------------------------------------
// graph
// ---------------------------------------------------------------------------

// Transition pairs of the matched latents, columns ordered [prev | current]
// in true-coordinate order, for the data-driven independence oracle.
diff::Tensor window_samples(const diff::Tensor& zhat,
                            const std::vector<int>& perm, int seq_len) {
    const int n = zhat.cols();
    std::vector<int> inv(n, 0);
    for (int k = 0; k < n; ++k) inv[perm[k]] = k;
    const int seqs = static_cast<int>(zhat.rows()) / seq_len;
    diff::Tensor s = diff::Tensor::zeros({seqs * (seq_len - 1), 2 * n});
    int row = 0;
    for (int k = 0; k < seqs; ++k) {
        for (int t = 1; t < seq_len; ++t) {
            for (int i = 0; i < n; ++i) {
                s.at(row, i) = zhat.at(k * seq_len + t - 1, inv[i]);
                s.at(row, n + i) = zhat.at(k * seq_len + t, inv[i]);
            }
            ++row;
        }
    }
    return s;
}

std::string orientation_report(const eval::GraphEstimate& g,
                               const eval::Metrics& gm,
                               const std::string& oracle_name) {
    std::ostringstream os;
    os << "orientation report\n";
    os << "  oracle: " << oracle_name << "\n";
    os << "  threshold: tau=" << fmt_double(g.tau_rel)
       << " (cut delayed=" << fmt_double(g.cut_delayed)
       << ", instantaneous=" << fmt_double(g.cut_inst) << ")\n";
    os << "  delayed edges:\n";
    bool any = false;
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (!g.delayed_at(i, j)) continue;
            os << "    z[t-1," << (j + 1) << "] -> z[t," << (i + 1) << "]\n";
            any = true;
        }
    }
    if (!any) os << "    (none)\n";
    os << "  instantaneous edges:\n";
    any = false;
    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) {
            if (!g.skeleton_at(i, j)) continue;
            any = true;
            if (g.oriented_at(j, i)) {
                os << "    z[t," << (i + 1) << "] -> z[t," << (j + 1) << "]";
                os << (g.rule_at(j, i) == eval::EdgeRule::kVStructure
                           ? "  (rule: v)\n"
                           : "  (rule: chain)\n");
            } else if (g.oriented_at(i, j)) {
                os << "    z[t," << (j + 1) << "] -> z[t," << (i + 1) << "]";
                os << (g.rule_at(i, j) == eval::EdgeRule::kVStructure
                           ? "  (rule: v)\n"
                           : "  (rule: chain)\n");
            } else {
                os << "    z[t," << (i + 1) << "] - z[t," << (j + 1)
                   << "]  (unoriented)\n";
            }
        }
    }
    if (!any) os << "    (none)\n";
    if (!g.notes.empty()) {
        os << "  notes:\n";
        for (const std::string& note : g.notes) os << "    " << note << "\n";
    }
    os << "  against ground truth: f1_delayed=" << fmt_double(gm.f1_delayed)
       << " f1_inst=" << fmt_double(gm.f1_inst) << " shd=" << gm.shd << "\n";
    return os.str();
}

int cmd_graph(const util::KeyVal& kv, const std::string& data,
              const std::string& ckpt, const std::string& out, bool force,
              int threads) {
    const RunConfig rc = read_config(kv);
    const scm::Dataset ds = scm::load_dataset(data);
    const nn::ModelConfig mc = make_model_config(rc, ds);
    const EvalProducts p = load_and_evaluate(rc, mc, ckpt, ds, threads);
    const auto truth = scm::GroundTruthGraph::from_spec(ds.spec);

    const eval::GraphEstimate skeleton =
        eval::threshold_graph(p.jd_aligned, p.je_aligned, rc.eval_tau);

    eval::CiOracle oracle;
    if (rc.eval_oracle == "exact") {
        oracle = eval::exact_ci_oracle(truth);
    } else {
        const diff::Tensor samples =
            window_samples(p.zhat, p.assign.perm, ds.seq_len());
        oracle = eval::data_ci_oracle(samples, rc.eval_alpha_level);
    }

    const eval::GraphEstimate oriented = eval::orient(skeleton, oracle);
    eval::Metrics gm = eval::graph_metrics(oriented, truth);
    gm.mcc = p.mcc;

    claim_out_dir(out, force);
    write_config_echo(rc, out);
    util::write_text_file(out + "/graph.dot", eval::graph_estimate_dot(oriented));
    const std::string report = orientation_report(oriented, gm, rc.eval_oracle);
    util::write_text_file(out + "/orientation.txt", report);
    std::cout << report;
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& runs, const std::string& out_csv) {
    if (runs.empty())
        throw ConfigError("report: pass at least one evaluation directory");

    struct Entry {
        std::string dataset;
        std::string method;
        double mcc = 0.0;
        double f1_delayed = 0.0;
        double f1_inst = 0.0;
        double f1_inst_best = 0.0;
        double shd = 0.0;
    };
    std::vector<Entry> entries;
    for (const std::string& dir : runs) {
        const std::string path = dir + "/sweep.json";
        if (!std::filesystem::exists(path))
            throw DataError("report: missing evaluation summary " + path);
        Entry e;
        try {
            const nlohmann::json j =
                nlohmann::json::parse(util::read_text_file(path));
            e.dataset = j.at("dataset").get<std::string>();
            e.method = j.at("method").get<std::string>();
            e.mcc = j.at("mcc").get<double>();
            e.f1_delayed = j.at("f1_delayed").get<double>();
            e.f1_inst = j.at("f1_inst").get<double>();
            e.f1_inst_best = j.at("f1_inst_best").get<double>();
            e.shd = j.at("shd").get<double>();
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("report: cannot read " + path + ": " + ex.what());
        }
        entries.push_back(std::move(e));
    }

    std::map<std::pair<std::string, std::string>, std::vector<const Entry*>> groups;
    for (const Entry& e : entries) groups[{e.dataset, e.method}].push_back(&e);

    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const auto sample_std = [&](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        const double m = mean(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };

    std::ostringstream os;
    os << "dataset,method,runs,mcc_mean,mcc_std,f1_delayed_mean,f1_delayed_std,"
          "f1_inst_mean,f1_inst_std,f1_inst_best_mean,shd_mean\n";
    for (const auto& [key, group] : groups) {
        std::vector<double> mcc, f1d, f1i, f1ib, shd;
        for (const Entry* e : group) {
            mcc.push_back(e->mcc);
            f1d.push_back(e->f1_delayed);
            f1i.push_back(e->f1_inst);
            f1ib.push_back(e->f1_inst_best);
            shd.push_back(e->shd);
        }
        os << key.first << "," << key.second << "," << group.size() << ","
           << fmt_double(mean(mcc)) << "," << fmt_double(sample_std(mcc)) << ","
           << fmt_double(mean(f1d)) << "," << fmt_double(sample_std(f1d)) << ","
           << fmt_double(mean(f1i)) << "," << fmt_double(sample_std(f1i)) << ","
           << fmt_double(mean(f1ib)) << "," << fmt_double(mean(shd)) << "\n";
    }
    if (out_csv.empty()) {
        std::cout << os.str();
    } else {
        util::write_text_file(out_csv, os.str());
        util::log_info("report: wrote ", out_csv);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

util::KeyVal gather_config(const std::string& config_path,
                           const std::vector<std::string>& sets) {
    util::KeyVal kv = config_path.empty()
                          ? util::KeyVal::parse_text("", "command line")
                          : util::KeyVal::parse_file(config_path);
    apply_sets(kv, sets);
    return kv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse latent process recovery toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    std::string data_dir;
    std::string ckpt_path;
    bool force = false;
    int threads = 1;

    const auto add_common = [&](CLI::App* cmd, bool with_threads) {
        cmd->add_option("--config", config_path, "config file with 'key = value' lines");
        cmd->add_option("--set", sets, "override a config key, repeatable (key=value)");
        cmd->add_flag("--force", force, "reuse a non-empty output directory");
        if (with_threads)
            cmd->add_option("--threads", threads, "worker threads")
                ->check(CLI::PositiveNumber);
        cmd->footer(config_key_help());
    };

    // gen
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    std::string gen_preset;
    std::string gen_spec;
    std::int64_t gen_samples = -1;
    std::int64_t seed_flag = -1;
    add_common(gen, true);
    gen->add_option("--out", out_dir, "dataset directory")->required();
    gen->add_option("--preset", gen_preset,
                    "named generating process (" + scm::preset_names() + ")");
    gen->add_option("--spec", gen_spec, "JSON process description file");
    gen->add_option("--n-samples", gen_samples, "number of sequences");
    gen->add_option("--seed", seed_flag, "root seed");

    // train
    CLI::App* tr = app.add_subcommand("train", "fit a model to a dataset");
    add_common(tr, false);
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--out", out_dir, "run directory for checkpoints and history")
        ->required();
    tr->add_option("--seed", seed_flag, "root seed");

    // eval
    CLI::App* ev = app.add_subcommand(
        "eval", "score a checkpoint: latent recovery and graph metrics");
    std::string eval_method_flag;
    add_common(ev, true);
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    ev->add_option("--out", out_dir, "evaluation output directory")->required();
    ev->add_option("--method", eval_method_flag,
                   "correlation for latent matching (pearson|spearman)");

    // graph
    CLI::App* gr = app.add_subcommand(
        "graph", "recover and orient the latent graph from a checkpoint");
    double tau_flag = -1.0;
    std::string oracle_flag;
    add_common(gr, true);
    gr->add_option("--data", data_dir, "dataset directory")->required();
    gr->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    gr->add_option("--out", out_dir, "graph output directory")->required();
    gr->add_option("--tau", tau_flag, "relative threshold for edge support");
    gr->add_option("--oracle", oracle_flag,
                   "independence oracle (exact|partialcorr)");

    // report
    CLI::App* rp = app.add_subcommand(
        "report", "aggregate evaluation runs into a CSV table");
    std::vector<std::string> run_dirs;
    std::string report_out;
    rp->add_option("--runs", run_dirs, "evaluation directories")->required();
    rp->add_option("--out", report_out, "CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            util::KeyVal kv = gather_config(config_path, sets);
            if (gen->count("--preset")) kv.set("gen.preset", gen_preset);
            if (gen->count("--spec")) kv.set("gen.spec", gen_spec);
            if (gen->count("--n-samples"))
                kv.set("gen.samples", std::to_string(gen_samples));
            if (gen->count("--seed")) kv.set("seed", std::to_string(seed_flag));
            return cmd_gen(kv, out_dir, force, threads);
        }
        if (tr->parsed()) {
            util::KeyVal kv = gather_config(config_path, sets);
            if (tr->count("--seed")) kv.set("seed", std::to_string(seed_flag));
            return cmd_train(kv, data_dir, out_dir, force);
        }
        if (ev->parsed()) {
            util::KeyVal kv = checkpoint_config(config_path, ckpt_path, sets);
            if (ev->count("--method")) kv.set("eval.method", eval_method_flag);
            return cmd_eval(kv, data_dir, ckpt_path, out_dir, force, threads);
        }
        if (gr->parsed()) {
            util::KeyVal kv = checkpoint_config(config_path, ckpt_path, sets);
            if (gr->count("--tau")) kv.set("eval.tau", fmt_double(tau_flag));
            if (gr->count("--oracle")) kv.set("eval.oracle", oracle_flag);
            return cmd_graph(kv, data_dir, ckpt_path, out_dir, force, threads);
        }
        if (rp->parsed()) {
            return cmd_report(run_dirs, report_out);
        }
        return 2;
    } catch (const ConfigError& e) {
        util::log_error(e.what());
        return 2;
    } catch (const DataError& e) {
        util::log_error(e.what());
        return 3;
    } catch (const NumericError& e) {
        util::log_error(e.what());
        return 4;
    } catch (const std::exception& e) {
        util::log_error(e.what());
        return 1;
    }
}
