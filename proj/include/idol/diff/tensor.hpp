#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "idol/util/errors.hpp"

namespace idol::diff {

template <class S>
class TapeT;

std::string shape_string(const std::vector<int>& shape);

// Dense row-major array of rank 0..2 (scalars are rank 0, matrices rank 2).
// Copies are shallow views onto shared storage; every operation in ops.hpp
// allocates fresh storage for its result. A tensor becomes differentiable by
// being watched on a tape or by being produced from watched inputs; plain
// tensors never contribute gradients and are safe to share across threads.
template <class S>
class TensorT {
public:
    using Scalar = S;

    TensorT() : TensorT(std::vector<int>{0}) {}

    explicit TensorT(std::vector<int> shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<S>>(count(shape_), S(0))) {}

    static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<int> shape, S v) {
        TensorT t(std::move(shape));
        for (auto& x : *t.data_) x = v;
        return t;
    }

    static TensorT scalar(S v) {
        TensorT t{std::vector<int>{}};
        t.data_->assign(1, v);
        return t;
    }

    static TensorT from(std::vector<int> shape, std::vector<S> values) {
        const std::size_t want = count(shape);
        if (values.size() != want) {
            throw ShapeError("tensor init: " + shape_string(shape) + " wants " +
                             std::to_string(want) + " values, got " +
                             std::to_string(values.size()));
        }
        TensorT t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<S>>(std::move(values));
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_->size(); }

    int rows() const {
        if (rank() == 2) return shape_[0];
        if (rank() == 1) return shape_[0];
        return 1;
    }
    int cols() const {
        if (rank() == 2) return shape_[1];
        return rank() == 0 ? 1 : shape_[0];
    }

    S value() const {
        if (numel() != 1) {
            throw ContractError("value() requires a single-element tensor, shape is " +
                                shape_string(shape_));
        }
        return (*data_)[0];
    }

    S& at(int i) { return (*data_)[static_cast<std::size_t>(i)]; }
    S at(int i) const { return (*data_)[static_cast<std::size_t>(i)]; }
    S& at(int r, int c) { return (*data_)[static_cast<std::size_t>(r) * shape_[1] + c]; }
    S at(int r, int c) const { return (*data_)[static_cast<std::size_t>(r) * shape_[1] + c]; }

    std::vector<S>& data() { return *data_; }
    const std::vector<S>& data() const { return *data_; }

    bool tracked() const { return node_ >= 0; }
    int node() const { return node_; }
    const std::shared_ptr<TapeT<S>>& tape() const { return tape_; }

    // Returns a view of the same storage with no tape attachment.
    TensorT detached() const {
        TensorT t = *this;
        t.tape_.reset();
        t.node_ = -1;
        return t;
    }

    // Deep copy of values, never tracked.
    TensorT clone_values() const {
        return TensorT::from(shape_, *data_);
    }

private:
    static std::size_t count(const std::vector<int>& shape) {
        std::size_t c = 1;
        for (int e : shape) {
            if (e < 0) throw ShapeError("negative extent in " + shape_string(shape));
            c *= static_cast<std::size_t>(e);
        }
        return c;
    }

    std::vector<int> shape_;
    std::shared_ptr<std::vector<S>> data_;
    std::shared_ptr<TapeT<S>> tape_;
    int node_ = -1;

    friend class TapeT<S>;
};

inline std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    s += "]";
    return s;
}

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

} // namespace idol::diff
