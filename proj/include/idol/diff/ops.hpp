#pragma once

#include <cmath>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "idol/diff/gemm.hpp"
#include "idol/diff/tape.hpp"
#include "idol/diff/tensor.hpp"
#include "idol/util/errors.hpp"

namespace idol::diff {

namespace detail {

template <class S>
std::shared_ptr<TapeT<S>> common_tape(const char* op,
                                      std::initializer_list<const TensorT<S>*> ins) {
    std::shared_ptr<TapeT<S>> tape;
    for (const auto* t : ins) {
        if (!t->tracked()) continue;
        if (!tape) {
            tape = t->tape();
        } else if (tape != t->tape()) {
            throw ContractError(std::string(op) + ": operands live on different tapes");
        }
    }
    return tape;
}

template <class S>
int node_on(const TensorT<S>& t, const std::shared_ptr<TapeT<S>>& tape) {
    return (t.tracked() && t.tape() == tape) ? t.node() : -1;
}

inline void check_rank2(const char* op, const std::vector<int>& shape) {
    if (shape.size() != 2) {
        throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " +
                         shape_string(shape));
    }
}

// Elementwise binary op with per-element partials taken as functions of
// (a, b, out).
template <class S, class FV, class FA, class FB>
TensorT<S> ew_binary(const char* name, const TensorT<S>& a, const TensorT<S>& b,
                     FV fv, FA dfa, FB dfb) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(name) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = fv(a.data()[i], b.data()[i]);
    auto tape = common_tape<S>(name, {&a, &b});
    if (tape) {
        const int na = node_on(a, tape);
        const int nb = node_on(b, tape);
        const int no = static_cast<int>(tape->num_nodes());
        auto av = a.detached();
        auto bv = b.detached();
        auto ov = out.detached();
        tape->record_node(n, [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            if (na >= 0) {
                auto& ga = t.adjoint(na);
                for (std::size_t i = 0; i < go.size(); ++i) {
                    ga[i] += go[i] * dfa(av.data()[i], bv.data()[i], ov.data()[i]);
                }
            }
            if (nb >= 0) {
                auto& gb = t.adjoint(nb);
                for (std::size_t i = 0; i < go.size(); ++i) {
                    gb[i] += go[i] * dfb(av.data()[i], bv.data()[i], ov.data()[i]);
                }
            }
        });
        tape->adopt(out, no);
    }
    return out;
}

// Elementwise unary op; partial is a function of (a, out).
template <class S, class FV, class FD>
TensorT<S> ew_unary(const char* name, const TensorT<S>& a, FV fv, FD dfdx) {
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = fv(a.data()[i]);
    auto tape = common_tape<S>(name, {&a});
    if (tape) {
        const int na = node_on(a, tape);
        const int no = static_cast<int>(tape->num_nodes());
        auto av = a.detached();
        auto ov = out.detached();
        tape->record_node(n, [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            auto& ga = t.adjoint(na);
            for (std::size_t i = 0; i < go.size(); ++i) {
                ga[i] += go[i] * dfdx(av.data()[i], ov.data()[i]);
            }
        });
        tape->adopt(out, no);
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// elementwise arithmetic
// ---------------------------------------------------------------------------

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    return detail::ew_binary<S>(
        "add", a, b, [](S x, S y) { return x + y; },
        [](S, S, S) { return S(1); }, [](S, S, S) { return S(1); });
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    return detail::ew_binary<S>(
        "sub", a, b, [](S x, S y) { return x - y; },
        [](S, S, S) { return S(1); }, [](S, S, S) { return S(-1); });
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    return detail::ew_binary<S>(
        "mul", a, b, [](S x, S y) { return x * y; },
        [](S, S y, S) { return y; }, [](S x, S, S) { return x; });
}

template <class S>
TensorT<S> div(const TensorT<S>& a, const TensorT<S>& b) {
    for (std::size_t i = 0; i < b.numel(); ++i) {
        if (b.data()[i] == S(0)) {
            throw NumericError("div: zero divisor at index " + std::to_string(i));
        }
    }
    return detail::ew_binary<S>(
        "div", a, b, [](S x, S y) { return x / y; },
        [](S, S y, S) { return S(1) / y; }, [](S, S y, S o) { return -o / y; });
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
    return detail::ew_unary<S>(
        "scale", a, [c](S x) { return c * x; }, [c](S, S) { return c; });
}

template <class S>
TensorT<S> shift(const TensorT<S>& a, S c) {
    return detail::ew_unary<S>(
        "shift", a, [c](S x) { return x + c; }, [](S, S) { return S(1); });
}

template <class S>
TensorT<S> neg(const TensorT<S>& a) {
    return scale(a, S(-1));
}

template <class S>
TensorT<S> leaky_relu(const TensorT<S>& a, S slope) {
    if (!(slope > S(0) && slope < S(1))) {
        throw ContractError("leaky_relu: slope must lie in (0, 1)");
    }
    // The subgradient at exactly 0 is the negative-branch slope.
    return detail::ew_unary<S>(
        "leaky_relu", a, [slope](S x) { return x > S(0) ? x : slope * x; },
        [slope](S x, S) { return x > S(0) ? S(1) : slope; });
}

template <class S>
TensorT<S> tanh(const TensorT<S>& a) {
    return detail::ew_unary<S>(
        "tanh", a, [](S x) { return std::tanh(x); },
        [](S, S o) { return S(1) - o * o; });
}

template <class S>
TensorT<S> exp(const TensorT<S>& a) {
    return detail::ew_unary<S>(
        "exp", a, [](S x) { return std::exp(x); }, [](S, S o) { return o; });
}

template <class S>
TensorT<S> log(const TensorT<S>& a) {
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (!(a.data()[i] > S(0))) {
            throw NumericError("log: nonpositive operand at index " + std::to_string(i));
        }
    }
    return detail::ew_unary<S>(
        "log", a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

template <class S>
TensorT<S> abs(const TensorT<S>& a) {
    return detail::ew_unary<S>(
        "abs", a, [](S x) { return x < S(0) ? -x : x; },
        [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
}

// log(max(|x|, floor)) with zero gradient on the clamped branch. Used for
// flow log-determinants so that a collapsing diagonal cannot produce -inf.
template <class S>
TensorT<S> log_abs_clamped(const TensorT<S>& a, S floor_eps) {
    if (!(floor_eps > S(0))) throw ContractError("log_abs_clamped: floor must be positive");
    return detail::ew_unary<S>(
        "log_abs_clamped", a,
        [floor_eps](S x) {
            const S m = x < S(0) ? -x : x;
            return std::log(m > floor_eps ? m : floor_eps);
        },
        [floor_eps](S x, S) {
            const S m = x < S(0) ? -x : x;
            return m > floor_eps ? S(1) / x : S(0);
        });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class S>
TensorT<S> sum(const TensorT<S>& a) {
    S acc = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a.data()[i];
    TensorT<S> out = TensorT<S>::scalar(acc);
    auto tape = detail::common_tape<S>("sum", {&a});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int no = static_cast<int>(tape->num_nodes());
        const std::size_t n = a.numel();
        tape->record_node(1, [=](TapeT<S>& t) {
            const S go = t.adjoint(no)[0];
            auto& ga = t.adjoint(na);
            for (std::size_t i = 0; i < n; ++i) ga[i] += go;
        });
        tape->adopt(out, no);
    }
    return out;
}

template <class S>
TensorT<S> mean(const TensorT<S>& a) {
    if (a.numel() == 0) throw ContractError("mean of an empty tensor");
    return scale(sum(a), S(1) / static_cast<S>(a.numel()));
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_rank2("matmul", a.shape());
    detail::check_rank2("matmul", b.shape());
    const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], p = b.shape()[1];
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
    TensorT<S> out = TensorT<S>::zeros({m, p});
    detail::gemm<S>(false, false, m, p, k, S(1), a.data().data(), b.data().data(), S(0),
                    out.data().data());
    auto tape = detail::common_tape<S>("matmul", {&a, &b});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int nb = detail::node_on(b, tape);
        const int no = static_cast<int>(tape->num_nodes());
        auto av = a.detached();
        auto bv = b.detached();
        tape->record_node(out.numel(), [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            if (na >= 0) {
                auto& ga = t.adjoint(na);
                detail::gemm<S>(false, true, m, k, p, S(1), go.data(), bv.data().data(), S(1),
                                ga.data());
            }
            if (nb >= 0) {
                auto& gb = t.adjoint(nb);
                detail::gemm<S>(true, false, k, p, m, S(1), av.data().data(), go.data(), S(1),
                                gb.data());
            }
        });
        tape->adopt(out, no);
    }
    return out;
}

// a · bᵀ without materializing the transpose; the gradient replay for
// per-sample Jacobian rows leans on this.
template <class S>
TensorT<S> matmul_nt(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_rank2("matmul_nt", a.shape());
    detail::check_rank2("matmul_nt", b.shape());
    const int m = a.shape()[0], k = a.shape()[1], p = b.shape()[0], k2 = b.shape()[1];
    if (k != k2) {
        throw ShapeError("matmul_nt: inner dimensions disagree, " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()) + " transposed");
    }
    TensorT<S> out = TensorT<S>::zeros({m, p});
    detail::gemm<S>(false, true, m, p, k, S(1), a.data().data(), b.data().data(), S(0),
                    out.data().data());
    auto tape = detail::common_tape<S>("matmul_nt", {&a, &b});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int nb = detail::node_on(b, tape);
        const int no = static_cast<int>(tape->num_nodes());
        auto av = a.detached();
        auto bv = b.detached();
        tape->record_node(out.numel(), [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            if (na >= 0) {
                auto& ga = t.adjoint(na);
                detail::gemm<S>(false, false, m, k, p, S(1), go.data(), bv.data().data(), S(1),
                                ga.data());
            }
            if (nb >= 0) {
                auto& gb = t.adjoint(nb);
                detail::gemm<S>(true, false, p, k, m, S(1), go.data(), av.data().data(), S(1),
                                gb.data());
            }
        });
        tape->adopt(out, no);
    }
    return out;
}

// Adds a row vector to every row of a matrix (linear-layer bias).
template <class S>
TensorT<S> add_rowvec(const TensorT<S>& a, const TensorT<S>& r) {
    detail::check_rank2("add_rowvec", a.shape());
    const int m = a.shape()[0], n = a.shape()[1];
    if (static_cast<int>(r.numel()) != n) {
        throw ShapeError("add_rowvec: row vector " + shape_string(r.shape()) +
                         " does not match matrix " + shape_string(a.shape()));
    }
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data()[i * n + j] = a.data()[i * n + j] + r.data()[j];
    auto tape = detail::common_tape<S>("add_rowvec", {&a, &r});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int nr = detail::node_on(r, tape);
        const int no = static_cast<int>(tape->num_nodes());
        tape->record_node(out.numel(), [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            if (na >= 0) {
                auto& ga = t.adjoint(na);
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (nr >= 0) {
                auto& gr = t.adjoint(nr);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) gr[j] += go[static_cast<std::size_t>(i) * n + j];
            }
        });
        tape->adopt(out, no);
    }
    return out;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

template <class S>
TensorT<S> reshape(const TensorT<S>& a, std::vector<int> shape) {
    TensorT<S> out = TensorT<S>::from(std::move(shape), a.data());
    if (out.numel() != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                         shape_string(out.shape()));
    }
    auto tape = detail::common_tape<S>("reshape", {&a});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int no = static_cast<int>(tape->num_nodes());
        tape->record_node(out.numel(), [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            auto& ga = t.adjoint(na);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        });
        tape->adopt(out, no);
    }
    return out;
}

template <class S>
TensorT<S> concat(const TensorT<S>& a, const TensorT<S>& b, int axis) {
    detail::check_rank2("concat", a.shape());
    detail::check_rank2("concat", b.shape());
    if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
    const int keep = 1 - axis;
    if (a.shape()[keep] != b.shape()[keep]) {
        throw ShapeError("concat: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()) +
                         " along axis " + std::to_string(axis));
    }
    const int am = a.shape()[0], an = a.shape()[1], bm = b.shape()[0], bn = b.shape()[1];
    const int om = axis == 0 ? am + bm : am;
    const int on = axis == 1 ? an + bn : an;
    TensorT<S> out = TensorT<S>::zeros({om, on});
    if (axis == 0) {
        std::copy(a.data().begin(), a.data().end(), out.data().begin());
        std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.numel());
    } else {
        for (int i = 0; i < om; ++i) {
            std::copy(a.data().begin() + static_cast<std::size_t>(i) * an,
                      a.data().begin() + static_cast<std::size_t>(i + 1) * an,
                      out.data().begin() + static_cast<std::size_t>(i) * on);
            std::copy(b.data().begin() + static_cast<std::size_t>(i) * bn,
                      b.data().begin() + static_cast<std::size_t>(i + 1) * bn,
                      out.data().begin() + static_cast<std::size_t>(i) * on + an);
        }
    }
    auto tape = detail::common_tape<S>("concat", {&a, &b});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int nb = detail::node_on(b, tape);
        const int no = static_cast<int>(tape->num_nodes());
        const std::size_t asz = a.numel();
        tape->record_node(out.numel(), [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            if (axis == 0) {
                if (na >= 0) {
                    auto& ga = t.adjoint(na);
                    for (std::size_t i = 0; i < asz; ++i) ga[i] += go[i];
                }
                if (nb >= 0) {
                    auto& gb = t.adjoint(nb);
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[asz + i];
                }
            } else {
                if (na >= 0) {
                    auto& ga = t.adjoint(na);
                    for (int i = 0; i < am; ++i)
                        for (int j = 0; j < an; ++j)
                            ga[static_cast<std::size_t>(i) * an + j] +=
                                go[static_cast<std::size_t>(i) * on + j];
                }
                if (nb >= 0) {
                    auto& gb = t.adjoint(nb);
                    for (int i = 0; i < bm; ++i)
                        for (int j = 0; j < bn; ++j)
                            gb[static_cast<std::size_t>(i) * bn + j] +=
                                go[static_cast<std::size_t>(i) * on + an + j];
                }
            }
        });
        tape->adopt(out, no);
    }
    return out;
}

template <class S>
TensorT<S> slice(const TensorT<S>& a, int axis, int begin, int end) {
    detail::check_rank2("slice", a.shape());
    if (axis != 0 && axis != 1) throw ContractError("slice: axis must be 0 or 1");
    const int extent = a.shape()[axis];
    if (begin < 0 || end > extent || begin >= end) {
        throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " +
                         shape_string(a.shape()));
    }
    const int m = a.shape()[0], n = a.shape()[1];
    const int om = axis == 0 ? end - begin : m;
    const int on = axis == 1 ? end - begin : n;
    TensorT<S> out = TensorT<S>::zeros({om, on});
    for (int i = 0; i < om; ++i)
        for (int j = 0; j < on; ++j) {
            const int si = axis == 0 ? i + begin : i;
            const int sj = axis == 1 ? j + begin : j;
            out.data()[static_cast<std::size_t>(i) * on + j] =
                a.data()[static_cast<std::size_t>(si) * n + sj];
        }
    auto tape = detail::common_tape<S>("slice", {&a});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int no = static_cast<int>(tape->num_nodes());
        tape->record_node(out.numel(), [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            auto& ga = t.adjoint(na);
            for (int i = 0; i < om; ++i)
                for (int j = 0; j < on; ++j) {
                    const int si = axis == 0 ? i + begin : i;
                    const int sj = axis == 1 ? j + begin : j;
                    ga[static_cast<std::size_t>(si) * n + sj] +=
                        go[static_cast<std::size_t>(i) * on + j];
                }
        });
        tape->adopt(out, no);
    }
    return out;
}

// Row gather with repeat-capable indices; backward scatter-adds.
template <class S>
TensorT<S> gather_rows(const TensorT<S>& a, const std::vector<int>& idx) {
    detail::check_rank2("gather_rows", a.shape());
    const int m = a.shape()[0], n = a.shape()[1];
    for (int r : idx) {
        if (r < 0 || r >= m) {
            throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " +
                             shape_string(a.shape()));
        }
    }
    const int om = static_cast<int>(idx.size());
    TensorT<S> out = TensorT<S>::zeros({om, n});
    for (int i = 0; i < om; ++i)
        std::copy(a.data().begin() + static_cast<std::size_t>(idx[i]) * n,
                  a.data().begin() + static_cast<std::size_t>(idx[i] + 1) * n,
                  out.data().begin() + static_cast<std::size_t>(i) * n);
    auto tape = detail::common_tape<S>("gather_rows", {&a});
    if (tape) {
        const int na = detail::node_on(a, tape);
        const int no = static_cast<int>(tape->num_nodes());
        auto indices = idx;
        tape->record_node(out.numel(), [=](TapeT<S>& t) {
            const auto& go = t.adjoint(no);
            auto& ga = t.adjoint(na);
            for (int i = 0; i < om; ++i)
                for (int j = 0; j < n; ++j)
                    ga[static_cast<std::size_t>(indices[i]) * n + j] +=
                        go[static_cast<std::size_t>(i) * n + j];
        });
        tape->adopt(out, no);
    }
    return out;
}

} // namespace idol::diff
