#pragma once

#include <string>
#include <vector>

#include "idol/diff/ops.hpp"
#include "idol/diff/tensor.hpp"
#include "idol/nn/mlp.hpp"
#include "idol/util/errors.hpp"
#include "idol/util/rng.hpp"

namespace idol::nn {

// Inverts one latent coordinate of the transition: maps the previous latent
// state together with the current coordinates up to and including index i to
// the noise estimate for coordinate i. The network output gets the raw
// current coordinate added on top, so a freshly constructed net (zero output
// layer) is the identity in that coordinate and its diagonal derivative is 1.
template <class S>
struct PriorNet {
    int index = 0;
    int n = 0;
    double slope = 0.2;
    std::vector<Linear<S>> hidden;
    Linear<S> out;

    int in_dim() const { return n + index + 1; }

    void init(int latent_dim, int i, int width, int depth, double act_slope,
              util::Rng& rng) {
        n = latent_dim;
        index = i;
        slope = act_slope;
        hidden.clear();
        int d = in_dim();
        for (int k = 0; k < depth; ++k) {
            Linear<S> layer;
            layer.init(d, width, rng);
            hidden.push_back(std::move(layer));
            d = width;
        }
        out.init_zero(d, 1);
    }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& dst) {
        for (size_t k = 0; k < hidden.size(); ++k)
            hidden[k].collect(prefix + ".h" + std::to_string(k), dst);
        out.collect(prefix + ".out", dst);
    }

    // u has in_dim() columns: previous state, then current coordinates 0..i.
    diff::TensorT<S> forward(const diff::TensorT<S>& u) const {
        if (u.cols() != in_dim())
            throw ShapeError("prior net " + std::to_string(index) +
                                   " expects " + std::to_string(in_dim()) +
                                   " inputs, got " + diff::shape_string(u.shape()));
        diff::TensorT<S> h = u;
        for (const auto& layer : hidden)
            h = diff::leaky_relu(layer.apply(h), static_cast<S>(slope));
        diff::TensorT<S> raw = out.apply(h);
        diff::TensorT<S> last = diff::slice(u, 1, in_dim() - 1, in_dim());
        return diff::add(raw, last);
    }

    struct Rows {
        diff::TensorT<S> eps;  // (m x 1) noise estimates
        diff::TensorT<S> rows; // (m x in_dim) per-row input gradients
    };

    // Computes the noise estimate together with the gradient of each output
    // element with respect to its own input row. The gradient is assembled
    // from recorded primitives (a vector-Jacobian replay through the layer
    // stack with the activation masks held constant), so it can itself be
    // differentiated with respect to the parameters.
    Rows forward_with_rows(const diff::TensorT<S>& u) const {
        if (u.cols() != in_dim())
            throw ShapeError("prior net " + std::to_string(index) +
                                   " expects " + std::to_string(in_dim()) +
                                   " inputs, got " + diff::shape_string(u.shape()));
        const int m = u.rows();
        const S sl = static_cast<S>(slope);

        std::vector<diff::TensorT<S>> masks;
        masks.reserve(hidden.size());
        diff::TensorT<S> h = u;
        for (const auto& layer : hidden) {
            diff::TensorT<S> pre = layer.apply(h);
            diff::TensorT<S> mask = diff::TensorT<S>::zeros(pre.shape());
            const auto& pv = pre.data();
            auto& mv = mask.data();
            for (size_t j = 0; j < pv.size(); ++j)
                mv[j] = pv[j] > S(0) ? S(1) : sl;
            masks.push_back(std::move(mask));
            h = diff::leaky_relu(pre, sl);
        }
        diff::TensorT<S> raw = out.apply(h);
        diff::TensorT<S> last = diff::slice(u, 1, in_dim() - 1, in_dim());

        Rows res;
        res.eps = diff::add(raw, last);

        diff::TensorT<S> ones = diff::TensorT<S>::full({m, 1}, S(1));
        diff::TensorT<S> g = diff::matmul_nt(ones, out.w);
        for (int k = static_cast<int>(hidden.size()) - 1; k >= 0; --k)
            g = diff::matmul_nt(diff::mul(g, masks[k]), hidden[k].w);

        diff::TensorT<S> passthrough = diff::TensorT<S>::zeros({m, in_dim()});
        for (int r = 0; r < m; ++r)
            passthrough.at(r, in_dim() - 1) = S(1);
        res.rows = diff::add(g, passthrough);
        return res;
    }
};

} // namespace idol::nn
