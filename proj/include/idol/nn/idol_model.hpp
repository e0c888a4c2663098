#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "idol/diff/ops.hpp"
#include "idol/diff/tensor.hpp"
#include "idol/nn/mlp.hpp"
#include "idol/nn/prior_net.hpp"
#include "idol/util/errors.hpp"
#include "idol/util/log.hpp"
#include "idol/util/rng.hpp"

namespace idol::nn {

struct ModelConfig {
    int n = 3;
    int d_x = 3;
    int seq_len = 5;

    double alpha = 0.1;
    double beta = 0.01;
    double recon_std = 1.0;
    double slope = 0.2;

    int enc_width = 128;
    int enc_depth = 2;
    int dec_width = 128;
    int dec_depth = 2;
    int prior_width = 128;
    int prior_depth = 3;

    bool penalize_diagonal = true;

    enum class Mode { kReconstruct, kForecast };
    Mode mode = Mode::kReconstruct;
    // Number of leading timesteps the encoder may see in forecast mode.
    int forecast_split = -1;

    void validate() const {
        if (n < 1) throw ConfigError("model: n must be >= 1");
        if (d_x < 1) throw ConfigError("model: d_x must be >= 1");
        if (seq_len < 2) throw ConfigError("model: seq_len must be >= 2");
        if (alpha < 0.0) throw ConfigError("model: alpha must be >= 0");
        if (beta < 0.0) throw ConfigError("model: beta must be >= 0");
        if (recon_std <= 0.0)
            throw ConfigError("model: recon_std must be > 0");
        if (!(slope > 0.0 && slope < 1.0))
            throw ConfigError("model: slope must be in (0, 1)");
        if (enc_depth < 1 || dec_depth < 1)
            throw ConfigError("model: encoder/decoder depth must be >= 1");
        if (prior_depth < 0)
            throw ConfigError("model: prior depth must be >= 0");
        if ((enc_depth > 1 && enc_width < 1) || (dec_depth > 1 && dec_width < 1) ||
            (prior_depth > 0 && prior_width < 1))
            throw ConfigError("model: hidden widths must be >= 1");
        if (mode == Mode::kForecast &&
            (forecast_split < 1 || forecast_split >= seq_len))
            throw ConfigError(
                "model: forecast_split must satisfy 1 <= split < seq_len");
    }
};

// Sequential variational autoencoder whose prior is a per-coordinate
// invertible map from latent transitions to independent unit Gaussians.
// The per-row input gradients of those maps double as transition Jacobians
// and carry the sparsity penalty.
template <class S>
class IdolModel {
public:
    using T = diff::TensorT<S>;

    IdolModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        util::Rng rng(seed, "model-init");

        int d = cfg_.d_x;
        for (int k = 0; k < cfg_.enc_depth; ++k) {
            const bool last = (k + 1 == cfg_.enc_depth);
            Linear<S> layer;
            layer.init(d, last ? 2 * cfg_.n : cfg_.enc_width, rng);
            enc_.push_back(std::move(layer));
            d = cfg_.enc_width;
        }
        d = cfg_.n;
        for (int k = 0; k < cfg_.dec_depth; ++k) {
            const bool last = (k + 1 == cfg_.dec_depth);
            Linear<S> layer;
            layer.init(d, last ? cfg_.d_x : cfg_.dec_width, rng);
            dec_.push_back(std::move(layer));
            d = cfg_.dec_width;
        }
        priors_.resize(cfg_.n);
        for (int i = 0; i < cfg_.n; ++i)
            priors_[i].init(cfg_.n, i, cfg_.prior_width, cfg_.prior_depth,
                            cfg_.slope, rng);

        x_mean_ = T::zeros({1, cfg_.d_x});
        x_std_ = T::full({1, cfg_.d_x}, S(1));
    }

    const ModelConfig& config() const { return cfg_; }

    std::vector<Linear<S>>& encoder_layers() { return enc_; }
    std::vector<Linear<S>>& decoder_layers() { return dec_; }
    std::vector<PriorNet<S>>& prior_nets() { return priors_; }

    // Trainable tensors in a fixed, documented order.
    std::vector<ParamRef<S>> parameters() {
        std::vector<ParamRef<S>> out;
        for (size_t k = 0; k < enc_.size(); ++k)
            enc_[k].collect("enc." + std::to_string(k), out);
        for (size_t k = 0; k < dec_.size(); ++k)
            dec_[k].collect("dec." + std::to_string(k), out);
        for (size_t i = 0; i < priors_.size(); ++i)
            priors_[i].collect("prior." + std::to_string(i), out);
        return out;
    }

    // Everything that must survive a save/load round trip, including the
    // input normalization statistics which are not trained.
    std::vector<ParamRef<S>> state() {
        auto out = parameters();
        out.push_back({"norm.mean", &x_mean_});
        out.push_back({"norm.std", &x_std_});
        return out;
    }

    // Drops any tape attachment left behind by training, so later forward
    // passes do not keep recording onto a stale graph. Values are untouched.
    void detach_state() {
        for (auto& p : state()) *p.tensor = p.tensor->detached();
    }

    void set_normalization(const std::vector<double>& mean,
                           const std::vector<double>& stdev) {
        if (static_cast<int>(mean.size()) != cfg_.d_x ||
            static_cast<int>(stdev.size()) != cfg_.d_x)
            throw ShapeError("normalization stats must have d_x entries");
        for (int j = 0; j < cfg_.d_x; ++j) {
            x_mean_.at(0, j) = static_cast<S>(mean[j]);
            x_std_.at(0, j) = static_cast<S>(std::max(stdev[j], 1e-8));
        }
    }

    // Applies the stored per-column statistics; the result is a constant
    // input tensor, never part of the gradient graph.
    T normalize(const T& x) const {
        if (x.cols() != cfg_.d_x)
            throw ShapeError("normalize: expected " +
                                   std::to_string(cfg_.d_x) + " columns, got " +
                                   diff::shape_string(x.shape()));
        T out = T::zeros(x.shape());
        for (int r = 0; r < x.rows(); ++r)
            for (int c = 0; c < cfg_.d_x; ++c)
                out.at(r, c) = (x.at(r, c) - x_mean_.at(0, c)) / x_std_.at(0, c);
        return out;
    }

    struct Encoded {
        T mu;
        T logvar;
    };

    // Per-row encoder: rows are timesteps, independent of window structure.
    Encoded encode(const T& x) const {
        T h = x;
        for (int k = 0; k + 1 < cfg_.enc_depth; ++k)
            h = diff::leaky_relu(enc_[k].apply(h), static_cast<S>(cfg_.slope));
        T head = enc_.back().apply(h);
        Encoded e;
        e.mu = diff::slice(head, 1, 0, cfg_.n);
        e.logvar = diff::slice(head, 1, cfg_.n, 2 * cfg_.n);
        return e;
    }

    // Encoder variant where only the first `split` timesteps of each window
    // reach the first layer; later rows are replaced by zero embeddings, so
    // future observations cannot leak into the posterior.
    Encoded encode_masked(const T& x, int batch, int split) const {
        const int L = cfg_.seq_len;
        if (x.rows() != batch * L)
            throw ShapeError("encode_masked: expected " +
                                   std::to_string(batch * L) + " rows, got " +
                                   diff::shape_string(x.shape()));
        if (split >= L) return encode(x);
        std::vector<int> hist;
        hist.reserve(static_cast<size_t>(batch) * split);
        for (int k = 0; k < batch; ++k)
            for (int t = 0; t < split; ++t) hist.push_back(k * L + t);
        T xh = diff::gather_rows(x, hist);
        T h1 = enc_[0].apply(xh);
        const int w1 = h1.cols();
        T zero_rows = T::zeros({batch * (L - split), w1});
        T combined = diff::concat(h1, zero_rows, 0);
        std::vector<int> perm(static_cast<size_t>(batch) * L);
        for (int k = 0; k < batch; ++k)
            for (int t = 0; t < L; ++t)
                perm[static_cast<size_t>(k) * L + t] =
                    t < split ? k * split + t
                              : batch * split + k * (L - split) + (t - split);
        T assembled = diff::gather_rows(combined, perm);

        if (cfg_.enc_depth == 1) {
            Encoded e;
            e.mu = diff::slice(assembled, 1, 0, cfg_.n);
            e.logvar = diff::slice(assembled, 1, cfg_.n, 2 * cfg_.n);
            return e;
        }
        T h = diff::leaky_relu(assembled, static_cast<S>(cfg_.slope));
        for (int k = 1; k + 1 < cfg_.enc_depth; ++k)
            h = diff::leaky_relu(enc_[k].apply(h), static_cast<S>(cfg_.slope));
        T head = enc_.back().apply(h);
        Encoded e;
        e.mu = diff::slice(head, 1, 0, cfg_.n);
        e.logvar = diff::slice(head, 1, cfg_.n, 2 * cfg_.n);
        return e;
    }

    T decode(const T& z) const {
        T h = z;
        for (int k = 0; k + 1 < cfg_.dec_depth; ++k)
            h = diff::leaky_relu(dec_[k].apply(h), static_cast<S>(cfg_.slope));
        T out = dec_.back().apply(h);
        if (cfg_.dec_depth == 1) out = diff::tanh(out);
        return out;
    }

    T reparameterize(const T& mu, const T& logvar, const T& eta) const {
        T sigma = diff::exp(diff::scale(logvar, S(0.5)));
        return diff::add(mu, diff::mul(sigma, eta));
    }

    // Noise estimates and per-row input gradients for every coordinate map,
    // evaluated on aligned (previous, current) latent rows.
    std::vector<typename PriorNet<S>::Rows> prior_rows(const T& zprev,
                                                       const T& zcur) const {
        if (zprev.rows() != zcur.rows() || zprev.cols() != cfg_.n ||
            zcur.cols() != cfg_.n)
            throw ShapeError("prior_rows: latent rows must be (m x n)");
        std::vector<typename PriorNet<S>::Rows> out;
        out.reserve(priors_.size());
        for (int i = 0; i < cfg_.n; ++i) {
            T u = diff::concat(zprev, diff::slice(zcur, 1, 0, i + 1), 1);
            out.push_back(priors_[i].forward_with_rows(u));
        }
        return out;
    }

    // Transition Jacobians for a single latent step. Row i of the first
    // matrix holds the derivatives of noise estimate i with respect to the
    // previous state; row i of the second holds those with respect to the
    // current coordinates 0..i (upper triangle structurally zero).
    std::pair<T, T> jacobians(const T& zprev, const T& zcur) const {
        if (zprev.rows() != 1 || zcur.rows() != 1)
            throw ShapeError("jacobians: expected single rows");
        auto rows = prior_rows(zprev.detached(), zcur.detached());
        T jd = T::zeros({cfg_.n, cfg_.n});
        T je = T::zeros({cfg_.n, cfg_.n});
        for (int i = 0; i < cfg_.n; ++i) {
            const T& r = rows[i].rows;
            for (int c = 0; c < cfg_.n; ++c) jd.at(i, c) = r.at(0, c);
            for (int c = 0; c <= i; ++c) je.at(i, c) = r.at(0, cfg_.n + c);
        }
        return {jd, je};
    }

    struct PriorTerms {
        T logp;      // summed over the batch
        T sparsity;  // summed over batch and transition pairs
        int degenerate = 0;
    };

    // Change-of-variables log density of latent windows plus the L1 mass of
    // the transition Jacobians, both as batch sums. zhat has batch*seq_len
    // rows in window-major order.
    PriorTerms prior_terms(const T& zhat, int batch) const {
        const int L = cfg_.seq_len;
        const int n = cfg_.n;
        if (zhat.rows() != batch * L || zhat.cols() != n)
            throw ShapeError("prior_terms: expected " +
                                   std::to_string(batch * L) + " x " +
                                   std::to_string(n) + " latents, got " +
                                   diff::shape_string(zhat.shape()));
        const double log2pi = std::log(2.0 * std::numbers::pi);
        const int m = batch * (L - 1);

        std::vector<int> first(batch);
        for (int k = 0; k < batch; ++k) first[k] = k * L;
        T z1 = diff::gather_rows(zhat, first);
        T logp = diff::shift(diff::scale(diff::sum(diff::mul(z1, z1)), S(-0.5)),
                             static_cast<S>(-0.5 * batch * n * log2pi));

        std::vector<int> prev(m), cur(m);
        int idx = 0;
        for (int k = 0; k < batch; ++k)
            for (int t = 1; t < L; ++t) {
                prev[idx] = k * L + t - 1;
                cur[idx] = k * L + t;
                ++idx;
            }
        T zprev = diff::gather_rows(zhat, prev);
        T zcur = diff::gather_rows(zhat, cur);

        PriorTerms out;
        bool have_spars = false;
        int first_bad_k = -1, first_bad_t = -1, first_bad_i = -1;
        for (int i = 0; i < n; ++i) {
            T u = diff::concat(zprev, diff::slice(zcur, 1, 0, i + 1), 1);
            auto r = priors_[i].forward_with_rows(u);

            logp = diff::add(
                logp,
                diff::shift(diff::scale(diff::sum(diff::mul(r.eps, r.eps)),
                                        S(-0.5)),
                            static_cast<S>(-0.5 * m * log2pi)));

            T diag = diff::slice(r.rows, 1, n + i, n + i + 1);
            for (int row = 0; row < m; ++row) {
                if (std::abs(static_cast<double>(diag.at(row, 0))) <
                    kLogDetFloor) {
                    ++out.degenerate;
                    if (first_bad_k < 0) {
                        first_bad_k = row / (L - 1);
                        first_bad_t = 1 + row % (L - 1);
                        first_bad_i = i;
                    }
                }
            }
            logp = diff::add(
                logp, diff::sum(diff::log_abs_clamped(
                          diag, static_cast<S>(kLogDetFloor))));

            T a = diff::abs(r.rows);
            T si = cfg_.penalize_diagonal
                       ? diff::sum(a)
                       : diff::sum(diff::slice(a, 1, 0, n + i));
            out.sparsity = have_spars ? diff::add(out.sparsity, si) : si;
            have_spars = true;
        }
        if (out.degenerate > 0)
            util::log_warn("prior log-determinant clamped for ",
                           out.degenerate,
                           " entries (first at batch window ", first_bad_k,
                           ", step ", first_bad_t, ", coordinate ",
                           first_bad_i, ")");
        out.logp = logp;
        return out;
    }

    // Log density of a single latent window under the learned prior.
    double prior_log_prob(const T& window) const {
        if (window.rows() != cfg_.seq_len || window.cols() != cfg_.n)
            throw ShapeError("prior_log_prob: expected " +
                                   std::to_string(cfg_.seq_len) + " x " +
                                   std::to_string(cfg_.n) + " window, got " +
                                   diff::shape_string(window.shape()));
        return static_cast<double>(prior_terms(window.detached(), 1).logp.value());
    }

    struct LossOut {
        T total;
        double total_value = 0.0;
        double recon = 0.0;       // reconstruction part (history rows only
                                  // when forecasting)
        double pred = 0.0;        // forecast part, zero in reconstruct mode
        double kl = 0.0;
        double sparsity = 0.0;
        int degenerate = 0;
    };

    // Full training objective on a batch of windows laid out as
    // (batch*seq_len x d_x) rows. Noise for the reparameterization is drawn
    // from the supplied stream, one row per latent row.
    LossOut loss(const T& x, int batch, util::Rng& rng) const {
        const int L = cfg_.seq_len;
        const int n = cfg_.n;
        if (batch < 1) throw ContractError("loss: batch must be >= 1");
        if (x.rows() != batch * L || x.cols() != cfg_.d_x)
            throw ShapeError("loss: expected " +
                                   std::to_string(batch * L) + " x " +
                                   std::to_string(cfg_.d_x) + " batch, got " +
                                   diff::shape_string(x.shape()));
        const double log2pi = std::log(2.0 * std::numbers::pi);

        T xn = normalize(x.detached());
        const bool forecasting = (cfg_.mode == ModelConfig::Mode::kForecast);
        Encoded e = forecasting
                        ? encode_masked(xn, batch, cfg_.forecast_split)
                        : encode(xn);

        T eta = T::zeros({batch * L, n});
        double eta_sq = 0.0;
        for (auto& v : eta.data()) {
            const double g = rng.normal();
            v = static_cast<S>(g);
        }
        for (const auto& v : eta.data())
            eta_sq += static_cast<double>(v) * static_cast<double>(v);

        T zhat = reparameterize(e.mu, e.logvar, eta);
        T xhat = decode(zhat);
        T d = diff::sub(xn, xhat);
        T sq = diff::mul(d, d);

        const S recon_scale = static_cast<S>(
            1.0 / (2.0 * cfg_.recon_std * cfg_.recon_std * batch));
        T recon_t, pred_t;
        bool have_pred = false;
        if (!forecasting || cfg_.forecast_split >= L) {
            recon_t = diff::scale(diff::sum(sq), recon_scale);
        } else {
            const int split = cfg_.forecast_split;
            std::vector<int> hist, fut;
            for (int k = 0; k < batch; ++k)
                for (int t = 0; t < L; ++t)
                    (t < split ? hist : fut).push_back(k * L + t);
            recon_t =
                diff::scale(diff::sum(diff::gather_rows(sq, hist)), recon_scale);
            pred_t =
                diff::scale(diff::sum(diff::gather_rows(sq, fut)), recon_scale);
            have_pred = true;
        }

        // Entropy side of the divergence; with zhat = mu + sigma*eta the
        // quadratic term reduces to the constant eta^2.
        T logq = diff::shift(
            diff::scale(diff::sum(e.logvar), S(-0.5)),
            static_cast<S>(-0.5 * eta_sq -
                           0.5 * static_cast<double>(batch) * L * n * log2pi));

        PriorTerms pt = prior_terms(zhat, batch);
        T kl_t = diff::scale(diff::sub(logq, pt.logp), S(1) / static_cast<S>(batch));
        T spars_t = diff::scale(
            pt.sparsity, S(1) / static_cast<S>(batch * (L - 1)));

        T total = recon_t;
        if (have_pred) total = diff::add(total, pred_t);
        total = diff::add(total, diff::scale(kl_t, static_cast<S>(cfg_.alpha)));
        total =
            diff::add(total, diff::scale(spars_t, static_cast<S>(cfg_.beta)));

        LossOut out;
        out.total = total;
        out.recon = static_cast<double>(recon_t.value());
        out.pred = have_pred ? static_cast<double>(pred_t.value()) : 0.0;
        out.kl = static_cast<double>(kl_t.value());
        out.sparsity = static_cast<double>(spars_t.value());
        out.total_value = static_cast<double>(total.value());
        out.degenerate = pt.degenerate;
        if (!std::isfinite(out.total_value))
            throw NumericError(
                "loss is not finite: recon=" + std::to_string(out.recon) +
                " pred=" + std::to_string(out.pred) +
                " kl=" + std::to_string(out.kl) +
                " sparsity=" + std::to_string(out.sparsity));
        return out;
    }

    static constexpr double kLogDetFloor = 1e-12;

private:
    ModelConfig cfg_;
    std::vector<Linear<S>> enc_;
    std::vector<Linear<S>> dec_;
    std::vector<PriorNet<S>> priors_;
    T x_mean_, x_std_;
};

} // namespace idol::nn
