#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "idol/diff/tensor.hpp"
#include "idol/nn/mlp.hpp"
#include "idol/util/errors.hpp"

namespace idol::train {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8; // added after the square root
};

// Scales all gradients by a common factor so their joint L2 norm does not
// exceed max_norm. Returns the norm before clipping. max_norm <= 0 disables.
template <class S>
double clip_gradients(std::vector<diff::TensorT<S>>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (const auto& v : g.data()) {
            const double d = static_cast<double>(v);
            sq += d * d;
        }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const S f = static_cast<S>(max_norm / norm);
        for (auto& g : grads)
            for (auto& v : g.data()) v *= f;
    }
    return norm;
}

template <class S>
class Adam {
public:
    Adam(std::vector<nn::ParamRef<S>> params, AdamConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (auto& p : params_) {
            m_.push_back(diff::TensorT<S>::zeros(p.tensor->shape()));
            v_.push_back(diff::TensorT<S>::zeros(p.tensor->shape()));
        }
    }

    // One update from gradients aligned with the parameter list.
    void step(const std::vector<diff::TensorT<S>>& grads) {
        if (grads.size() != params_.size())
            throw ContractError("adam: gradient list does not match parameters");
        ++t_;
        const S c1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, t_));
        const S c2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, t_));
        const S b1 = static_cast<S>(cfg_.beta1);
        const S b2 = static_cast<S>(cfg_.beta2);
        const S lr = static_cast<S>(cfg_.lr);
        const S eps = static_cast<S>(cfg_.eps);
        for (size_t j = 0; j < params_.size(); ++j) {
            auto& p = params_[j].tensor->data();
            const auto& g = grads[j].data();
            if (g.size() != p.size())
                throw ShapeError("adam: gradient shape mismatch for " +
                                 params_[j].name);
            auto& m = m_[j].data();
            auto& v = v_[j].data();
            for (size_t i = 0; i < p.size(); ++i) {
                m[i] = b1 * m[i] + (S(1) - b1) * g[i];
                v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
                const S mhat = m[i] / c1;
                const S vhat = v[i] / c2;
                p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    std::int64_t steps() const { return t_; }
    void set_steps(std::int64_t t) { t_ = t; }

    // Moment tensors named so they can ride along in checkpoints.
    std::vector<nn::ParamRef<S>> moment_state() {
        std::vector<nn::ParamRef<S>> out;
        for (size_t j = 0; j < params_.size(); ++j) {
            out.push_back({"adam.m." + params_[j].name, &m_[j]});
            out.push_back({"adam.v." + params_[j].name, &v_[j]});
        }
        return out;
    }

private:
    std::vector<nn::ParamRef<S>> params_;
    AdamConfig cfg_;
    std::vector<diff::TensorT<S>> m_, v_;
    std::int64_t t_ = 0;
};

} // namespace idol::train
