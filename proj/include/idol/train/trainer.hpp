#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>
#include <vector>

#include "idol/diff/tape.hpp"
#include "idol/nn/idol_model.hpp"
#include "idol/scm/dataset.hpp"
#include "idol/train/adam.hpp"
#include "idol/train/checkpoint.hpp"
#include "idol/util/binio.hpp"
#include "idol/util/log.hpp"
#include "idol/util/rng.hpp"

namespace idol::train {

struct TrainConfig {
    int epochs = 25;
    int batch = 64;
    double lr = 1e-3;
    double grad_clip = 1.0; // joint L2 ceiling, <= 0 disables
    std::uint64_t seed = 769;
    bool standardize = true;
    int checkpoint_every = 0; // extra periodic checkpoints, 0 = off
    std::string out_dir;
    std::string resume_from; // checkpoint path, empty = fresh start

    void validate() const {
        if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
        if (batch < 1) throw ConfigError("train: batch must be >= 1");
        if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
        if (checkpoint_every < 0)
            throw ConfigError("train: checkpoint_every must be >= 0");
        if (out_dir.empty()) throw ConfigError("train: out_dir is required");
    }
};

struct TrainResult {
    int epochs_run = 0;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    std::string history_path;
    std::string best_path;
    std::string last_path;
};

// Epoch-driven optimizer loop. All randomness comes from streams derived
// from (seed, purpose, epoch), so resuming at an epoch boundary replays the
// exact trajectory of an uninterrupted run.
template <class S>
class Trainer {
public:
    Trainer(nn::IdolModel<S>& model, const scm::Dataset& data, TrainConfig cfg,
            std::string config_hash = "")
        : model_(model), data_(data), cfg_(cfg),
          config_hash_(std::move(config_hash)) {
        cfg_.validate();
        if (data_.train_count() < 1)
            throw DataError("train: dataset has no training sequences");
        if (model_.config().seq_len != data_.seq_len() ||
            model_.config().d_x != data_.n())
            throw ConfigError("train: model window does not match dataset");
        if (cfg_.standardize) apply_standardization();
    }

    TrainResult run() {
        util::ensure_dir(cfg_.out_dir);
        auto params = model_.parameters();
        AdamConfig ac;
        ac.lr = cfg_.lr;
        Adam<S> adam(params, ac);

        auto state = checkpoint_state(adam);
        CheckpointMeta meta;
        meta.seed = cfg_.seed;
        meta.config_hash = config_hash_;

        int start_epoch = 1;
        TrainResult res;
        res.history_path = cfg_.out_dir + "/history.csv";
        res.best_path = cfg_.out_dir + "/checkpoint_best.json";
        res.last_path = cfg_.out_dir + "/checkpoint_last.json";

        if (!cfg_.resume_from.empty()) {
            CheckpointMeta old = load_checkpoint<S>(cfg_.resume_from, state);
            adam.set_steps(old.adam_step);
            start_epoch = old.epoch + 1;
            res.best_epoch = old.best_epoch;
            res.best_val = old.best_epoch >= 0
                               ? old.best_val
                               : std::numeric_limits<double>::infinity();
            util::log_info("resuming from ", cfg_.resume_from, " at epoch ",
                           start_epoch);
        }

        std::ofstream hist(res.history_path, std::ios::app);
        if (!hist) throw DataError("cannot open " + res.history_path);
        hist.seekp(0, std::ios::end);
        if (hist.tellp() == 0)
            hist << "epoch,split,recon,kl,sparsity,total\n";
        hist << std::setprecision(17);

        const int last_epoch = cfg_.epochs;
        for (int epoch = start_epoch; epoch <= last_epoch; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            Averages train_avg;
            try {
                train_avg = run_train_epoch(adam, params, epoch);
            } catch (const NumericError& e) {
                meta.epoch = epoch - 1;
                meta.adam_step = adam.steps();
                meta.best_epoch = res.best_epoch;
                meta.best_val = res.best_val;
                const std::string abort_path =
                    cfg_.out_dir + "/checkpoint_abort.json";
                save_checkpoint(abort_path, meta, state);
                throw NumericError(std::string(e.what()) +
                                   "; state saved to " + abort_path);
            }
            Averages val_avg = run_val_epoch(epoch);
            const auto t1 = std::chrono::steady_clock::now();
            const double secs =
                std::chrono::duration<double>(t1 - t0).count();

            write_row(hist, epoch, "train", train_avg);
            write_row(hist, epoch, "val", val_avg);
            hist.flush();
            util::log_info("epoch ", epoch, " train ", train_avg.total,
                           " val ", val_avg.total, " (",
                           static_cast<int>(secs * 1000), " ms)");

            meta.epoch = epoch;
            meta.adam_step = adam.steps();
            const bool improved = val_avg.total < res.best_val;
            if (improved) {
                res.best_val = val_avg.total;
                res.best_epoch = epoch;
            }
            meta.best_epoch = res.best_epoch;
            meta.best_val = res.best_val;
            bool wrote = false;
            if (improved) {
                save_checkpoint(res.best_path, meta, state);
                wrote = true;
            }
            if (cfg_.checkpoint_every > 0 &&
                epoch % cfg_.checkpoint_every == 0) {
                save_checkpoint(cfg_.out_dir + "/checkpoint_epoch" +
                                    std::to_string(epoch) + ".json",
                                meta, state);
                wrote = true;
            }
            if (epoch == last_epoch) {
                save_checkpoint(res.last_path, meta, state);
                wrote = true;
            }
            if (wrote) quantize_to_f32(state);
            res.epochs_run = epoch - start_epoch + 1;
        }
        if (start_epoch > last_epoch) {
            // Nothing to do (epochs = 0, or resume already past the end):
            // still leave a final checkpoint behind.
            meta.epoch = last_epoch;
            meta.adam_step = adam.steps();
            meta.best_epoch = res.best_epoch;
            meta.best_val = res.best_val;
            save_checkpoint(res.last_path, meta, state);
            quantize_to_f32(state);
        }
        model_.detach_state();
        return res;
    }

private:
    struct Averages {
        double recon = 0, kl = 0, sparsity = 0, total = 0;
    };

    void apply_standardization() {
        const int n = data_.n();
        const int L = data_.seq_len();
        std::vector<double> mean(n, 0.0), var(n, 0.0);
        const std::size_t begin =
            static_cast<std::size_t>(data_.val_count) * L * n;
        const std::size_t rows =
            static_cast<std::size_t>(data_.train_count()) * L;
        for (std::size_t r = 0; r < rows; ++r)
            for (int c = 0; c < n; ++c)
                mean[c] += data_.x[begin + r * n + c];
        for (int c = 0; c < n; ++c) mean[c] /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (int c = 0; c < n; ++c) {
                const double d = data_.x[begin + r * n + c] - mean[c];
                var[c] += d * d;
            }
        std::vector<double> stdev(n);
        for (int c = 0; c < n; ++c)
            stdev[c] = std::sqrt(var[c] / static_cast<double>(rows));
        model_.set_normalization(mean, stdev);
    }

    std::vector<nn::ParamRef<S>> checkpoint_state(Adam<S>& adam) {
        auto state = model_.state();
        for (auto& m : adam.moment_state()) state.push_back(m);
        return state;
    }

    diff::TensorT<S> make_batch(const std::vector<int>& seq_ids, size_t from,
                                size_t count) const {
        const int L = data_.seq_len();
        const int n = data_.n();
        diff::TensorT<S> x =
            diff::TensorT<S>::zeros({static_cast<int>(count) * L, n});
        for (size_t b = 0; b < count; ++b) {
            const float* src = data_.x_seq(seq_ids[from + b]);
            for (int t = 0; t < L; ++t)
                for (int c = 0; c < n; ++c)
                    x.at(static_cast<int>(b) * L + t, c) =
                        static_cast<S>(src[t * n + c]);
        }
        return x;
    }

    Averages run_train_epoch(Adam<S>& adam, std::vector<nn::ParamRef<S>>& params,
                             int epoch) {
        std::vector<int> order;
        util::Rng shuffle_rng(cfg_.seed, "shuffle", epoch);
        shuffle_rng.shuffle_indices(order, data_.train_count());
        for (auto& id : order) id += data_.val_count;

        util::Rng eta(cfg_.seed, "eta", epoch);
        Averages avg;
        size_t done = 0;
        double weight = 0.0;
        while (done < order.size()) {
            const size_t count =
                std::min<size_t>(cfg_.batch, order.size() - done);
            diff::TensorT<S> x = make_batch(order, done, count);
            auto tape = diff::TapeT<S>::create();
            for (auto& p : params) tape->watch(*p.tensor);
            auto out = model_.loss(x, static_cast<int>(count), eta);
            tape->backward(out.total);
            std::vector<diff::TensorT<S>> grads;
            grads.reserve(params.size());
            for (auto& p : params) grads.push_back(tape->grad(*p.tensor));
            clip_gradients(grads, cfg_.grad_clip);
            adam.step(grads);

            const double w = static_cast<double>(count);
            avg.recon += (out.recon + out.pred) * w;
            avg.kl += out.kl * w;
            avg.sparsity += out.sparsity * w;
            avg.total += out.total_value * w;
            weight += w;
            done += count;
        }
        avg.recon /= weight;
        avg.kl /= weight;
        avg.sparsity /= weight;
        avg.total /= weight;
        return avg;
    }

    Averages run_val_epoch(int epoch) {
        Averages avg;
        if (data_.val_count == 0) return avg;
        std::vector<int> ids(data_.val_count);
        for (int i = 0; i < data_.val_count; ++i) ids[i] = i;
        util::Rng eta(cfg_.seed, "val", epoch);
        size_t done = 0;
        double weight = 0.0;
        while (done < ids.size()) {
            const size_t count = std::min<size_t>(cfg_.batch, ids.size() - done);
            diff::TensorT<S> x = make_batch(ids, done, count);
            auto out = model_.loss(x, static_cast<int>(count), eta);
            const double w = static_cast<double>(count);
            avg.recon += (out.recon + out.pred) * w;
            avg.kl += out.kl * w;
            avg.sparsity += out.sparsity * w;
            avg.total += out.total_value * w;
            weight += w;
            done += count;
        }
        avg.recon /= weight;
        avg.kl /= weight;
        avg.sparsity /= weight;
        avg.total /= weight;
        return avg;
    }

    static void write_row(std::ofstream& hist, int epoch, const char* split,
                          const Averages& a) {
        hist << epoch << ',' << split << ',' << a.recon << ',' << a.kl << ','
             << a.sparsity << ',' << a.total << '\n';
    }

    nn::IdolModel<S>& model_;
    const scm::Dataset& data_;
    TrainConfig cfg_;
    std::string config_hash_;
};

} // namespace idol::train
