#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "idol/diff/ops.hpp"
#include "idol/diff/tensor.hpp"
#include "idol/util/rng.hpp"

namespace idol::nn {

template <class S>
struct ParamRef {
    std::string name;
    diff::TensorT<S>* tensor;
};

// Dense layer holding weights as (in x out) so activations right-multiply.
template <class S>
struct Linear {
    diff::TensorT<S> w;
    diff::TensorT<S> b;

    void init(int in, int out, util::Rng& rng) {
        w = diff::TensorT<S>::zeros({in, out});
        b = diff::TensorT<S>::zeros({1, out});
        const double k = 1.0 / std::sqrt(static_cast<double>(in));
        for (auto& v : w.data()) v = static_cast<S>(rng.uniform(-k, k));
        for (auto& v : b.data()) v = static_cast<S>(rng.uniform(-k, k));
    }

    void init_zero(int in, int out) {
        w = diff::TensorT<S>::zeros({in, out});
        b = diff::TensorT<S>::zeros({1, out});
    }

    diff::TensorT<S> apply(const diff::TensorT<S>& x) const {
        return diff::add_rowvec(diff::matmul(x, w), b);
    }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        out.push_back({prefix + ".w", &w});
        out.push_back({prefix + ".b", &b});
    }
};

} // namespace idol::nn
