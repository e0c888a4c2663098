#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "idol/diff/ops.hpp"
#include "idol/diff/tensor.hpp"
#include "idol/nn/idol_model.hpp"
#include "idol/scm/dataset.hpp"
#include "idol/util/errors.hpp"
#include "idol/util/parallel.hpp"

namespace idol::eval {

struct LatentExtract {
    diff::Tensor zhat;   // encoder means, one row per validation timestep
    diff::Tensor ztrue;  // generating latents aligned row for row
};

namespace detail {

template <class S>
void check_compatible(const nn::IdolModel<S>& model, const scm::Dataset& ds) {
    if (ds.val_count < 1)
        throw DataError("eval: dataset has no validation sequences");
    if (model.config().d_x != ds.n() || model.config().seq_len != ds.seq_len())
        throw ConfigError("eval: model window does not match dataset");
}

} // namespace detail

// Encoder means over the validation split next to the generating latents,
// both widened to double with one row per timestep.
template <class S>
LatentExtract extract_latents(nn::IdolModel<S>& model, const scm::Dataset& ds) {
    detail::check_compatible(model, ds);
    model.detach_state();
    const int L = ds.seq_len();
    const int d = ds.n();
    const int V = ds.val_count;
    const int n = model.config().n;

    diff::TensorT<S> x = diff::TensorT<S>::zeros({V * L, d});
    for (int k = 0; k < V; ++k) {
        const float* src = ds.x_seq(k);
        for (int t = 0; t < L; ++t)
            for (int c = 0; c < d; ++c)
                x.at(k * L + t, c) = static_cast<S>(src[t * d + c]);
    }
    auto enc = model.encode(model.normalize(x));

    LatentExtract out;
    out.zhat = diff::Tensor::zeros({V * L, n});
    for (int r = 0; r < V * L; ++r)
        for (int c = 0; c < n; ++c)
            out.zhat.at(r, c) = static_cast<double>(enc.mu.at(r, c));
    out.ztrue = diff::Tensor::zeros({V * L, d});
    for (int k = 0; k < V; ++k) {
        const float* src = ds.z_seq(k);
        for (int t = 0; t < L; ++t)
            for (int c = 0; c < d; ++c)
                out.ztrue.at(k * L + t, c) = static_cast<double>(src[t * d + c]);
    }
    return out;
}

// Mean absolute transition Jacobians over every validation transition,
// evaluated at the encoder means. Transitions are processed in fixed
// 256-row chunks whose partial sums are combined in chunk order, so the
// result is bitwise identical for any thread count.
template <class S>
std::pair<diff::Tensor, diff::Tensor> extract_mean_jacobians(
    nn::IdolModel<S>& model, const scm::Dataset& ds, int threads = 1) {
    LatentExtract lat = extract_latents(model, ds);
    const int L = ds.seq_len();
    const int V = ds.val_count;
    const int n = model.config().n;

    const std::int64_t pairs = static_cast<std::int64_t>(V) * (L - 1);
    constexpr std::int64_t kChunk = 256;
    const std::int64_t chunks = (pairs + kChunk - 1) / kChunk;

    std::vector<std::vector<double>> part_d(static_cast<std::size_t>(chunks));
    std::vector<std::vector<double>> part_e(static_cast<std::size_t>(chunks));
    util::parallel_for(chunks, threads, [&](std::int64_t c) {
        const std::int64_t begin = c * kChunk;
        const std::int64_t end = std::min(pairs, begin + kChunk);
        const int m = static_cast<int>(end - begin);
        diff::TensorT<S> zprev = diff::TensorT<S>::zeros({m, n});
        diff::TensorT<S> zcur = diff::TensorT<S>::zeros({m, n});
        for (int r = 0; r < m; ++r) {
            const std::int64_t p = begin + r;
            const int k = static_cast<int>(p / (L - 1));
            const int t = 1 + static_cast<int>(p % (L - 1));
            for (int col = 0; col < n; ++col) {
                zprev.at(r, col) =
                    static_cast<S>(lat.zhat.at(k * L + t - 1, col));
                zcur.at(r, col) = static_cast<S>(lat.zhat.at(k * L + t, col));
            }
        }
        auto rows = model.prior_rows(zprev, zcur);
        std::vector<double> sd(static_cast<std::size_t>(n) * n, 0.0);
        std::vector<double> se(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i) {
            const auto& ri = rows[static_cast<std::size_t>(i)].rows;
            for (int r = 0; r < m; ++r) {
                for (int col = 0; col < n; ++col)
                    sd[static_cast<std::size_t>(i) * n + col] +=
                        std::abs(static_cast<double>(ri.at(r, col)));
                for (int col = 0; col <= i; ++col)
                    se[static_cast<std::size_t>(i) * n + col] +=
                        std::abs(static_cast<double>(ri.at(r, n + col)));
            }
        }
        part_d[static_cast<std::size_t>(c)] = std::move(sd);
        part_e[static_cast<std::size_t>(c)] = std::move(se);
    });

    diff::Tensor jd = diff::Tensor::zeros({n, n});
    diff::Tensor je = diff::Tensor::zeros({n, n});
    for (std::int64_t c = 0; c < chunks; ++c)
        for (int i = 0; i < n * n; ++i) {
            jd.at(i) += part_d[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            je.at(i) += part_e[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        }
    const double scale = 1.0 / static_cast<double>(pairs);
    for (int i = 0; i < n * n; ++i) {
        jd.at(i) *= scale;
        je.at(i) *= scale;
    }
    return {jd, je};
}

} // namespace idol::eval
