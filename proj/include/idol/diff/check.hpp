#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "idol/diff/ops.hpp"
#include "idol/diff/tape.hpp"
#include "idol/diff/tensor.hpp"

namespace idol::diff {

// Full Jacobian of a vector-valued function by one reverse pass per output
// component. Each pass runs on a private tape, so this is a value-level
// utility: the result carries no gradient history. The training-time path
// that needs differentiable Jacobian entries builds them from primitives
// instead (see the prior network gradient replay).
template <class S>
TensorT<S> jacobian(const std::function<TensorT<S>(const TensorT<S>&)>& f, const TensorT<S>& x) {
    const TensorT<S> y0 = f(x.detached());
    const int d_out = static_cast<int>(y0.numel());
    const int d_in = static_cast<int>(x.numel());
    TensorT<S> jac = TensorT<S>::zeros({d_out, d_in});
    for (int i = 0; i < d_out; ++i) {
        auto tape = TapeT<S>::create();
        TensorT<S> xi = x.clone_values();
        tape->watch(xi);
        TensorT<S> y = f(xi);
        TensorT<S> flat = reshape(y, {static_cast<int>(y.numel()), 1});
        TensorT<S> yi = slice(flat, 0, i, i + 1);
        tape->backward(yi);
        const TensorT<S> g = tape->grad(xi);
        for (int j = 0; j < d_in; ++j) jac.at(i, j) = g.data()[static_cast<std::size_t>(j)];
    }
    return jac;
}

// Central-difference Jacobian, the oracle the autodiff results are tested
// against. Pure value computation.
template <class S>
TensorT<S> fd_jacobian(const std::function<TensorT<S>(const TensorT<S>&)>& f, const TensorT<S>& x,
                       double h) {
    if (!(h > 0)) throw ContractError("fd_jacobian: step must be positive");
    const TensorT<S> y0 = f(x.detached());
    const int d_out = static_cast<int>(y0.numel());
    const int d_in = static_cast<int>(x.numel());
    TensorT<S> jac = TensorT<S>::zeros({d_out, d_in});
    for (int j = 0; j < d_in; ++j) {
        TensorT<S> xp = x.clone_values();
        TensorT<S> xm = x.clone_values();
        xp.data()[static_cast<std::size_t>(j)] += static_cast<S>(h);
        xm.data()[static_cast<std::size_t>(j)] -= static_cast<S>(h);
        const TensorT<S> yp = f(xp);
        const TensorT<S> ym = f(xm);
        for (int i = 0; i < d_out; ++i) {
            const double d = (static_cast<double>(yp.data()[static_cast<std::size_t>(i)]) -
                              static_cast<double>(ym.data()[static_cast<std::size_t>(i)])) /
                             (2.0 * h);
            jac.at(i, j) = static_cast<S>(d);
        }
    }
    return jac;
}

inline double relative_error(double got, double want) {
    const double scale = std::max({std::abs(got), std::abs(want), 1e-6});
    return std::abs(got - want) / scale;
}

// Compares the reverse-mode gradient of a scalar function against central
// differences coordinate by coordinate and returns the worst relative error.
template <class S>
double finite_diff_check(const std::function<TensorT<S>(const TensorT<S>&)>& f,
                         const TensorT<S>& x, double h) {
    if (!(h > 0)) throw ContractError("finite_diff_check: step must be positive");
    auto tape = TapeT<S>::create();
    TensorT<S> xw = x.clone_values();
    tape->watch(xw);
    TensorT<S> loss = f(xw);
    tape->backward(loss);
    const TensorT<S> g = tape->grad(xw);

    double worst = 0.0;
    for (std::size_t j = 0; j < x.numel(); ++j) {
        TensorT<S> xp = x.clone_values();
        TensorT<S> xm = x.clone_values();
        xp.data()[j] += static_cast<S>(h);
        xm.data()[j] -= static_cast<S>(h);
        const double fp = static_cast<double>(f(xp).value());
        const double fm = static_cast<double>(f(xm).value());
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, relative_error(static_cast<double>(g.data()[j]), fd));
    }
    return worst;
}

} // namespace idol::diff
