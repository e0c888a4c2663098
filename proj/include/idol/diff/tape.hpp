#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "idol/diff/tensor.hpp"
#include "idol/util/errors.hpp"

namespace idol::diff {

// Reverse-mode tape. Rebuilt per forward pass (define by run): operations
// append nodes in execution order, which is already topological, and backward
// walks the list once in reverse. backward is single use; a second call on
// the same tape raises a contract error. A tape is confined to one thread.
//
// Tensors hold shared ownership of their tape, so a tape stays alive while
// any tensor produced on it is alive, and all saved intermediates are freed
// together once the last such tensor goes away.
template <class S>
class TapeT : public std::enable_shared_from_this<TapeT<S>> {
public:
    using Pull = std::function<void(TapeT&)>;

    static std::shared_ptr<TapeT> create() {
        return std::shared_ptr<TapeT>(new TapeT());
    }

    // Registers t as a differentiable leaf on this tape.
    void watch(TensorT<S>& t) {
        t.tape_ = this->shared_from_this();
        t.node_ = record_node(t.numel(), nullptr);
    }

    // Internal: called by ops to register a computed output. pull must add
    // d(loss)/d(output) contributions into the adjoints of the op's inputs.
    int record_node(std::size_t numel, Pull pull) {
        nodes_.push_back(Node{numel, std::move(pull)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Internal: attaches an op output to this tape.
    void adopt(TensorT<S>& t, int node) {
        t.tape_ = this->shared_from_this();
        t.node_ = node;
    }

    // Adjoint buffer for a node, allocated on first touch.
    std::vector<S>& adjoint(int node) {
        auto& a = adjoints_[static_cast<std::size_t>(node)];
        if (a.empty() && nodes_[static_cast<std::size_t>(node)].numel > 0) {
            a.assign(nodes_[static_cast<std::size_t>(node)].numel, S(0));
        }
        return a;
    }

    void backward(const TensorT<S>& loss) {
        if (ran_backward_) {
            throw ContractError("backward was already run on this tape; rebuild the graph");
        }
        if (loss.numel() != 1) {
            throw ContractError("backward requires a scalar loss, shape is " +
                                shape_string(loss.shape()));
        }
        if (loss.tape().get() != this) {
            throw ContractError("loss tensor does not belong to this tape");
        }
        ran_backward_ = true;
        adjoints_.assign(nodes_.size(), {});
        adjoint(loss.node())[0] = S(1);
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            auto& node = nodes_[static_cast<std::size_t>(i)];
            if (!node.pull) continue;
            if (adjoints_[static_cast<std::size_t>(i)].empty()) continue;
            node.pull(*this);
        }
    }

    // Gradient of the last backward() with respect to a tracked tensor.
    TensorT<S> grad(const TensorT<S>& t) {
        if (!ran_backward_) throw ContractError("grad queried before backward");
        if (t.tape().get() != this || !t.tracked()) {
            throw ContractError("grad queried for a tensor not tracked on this tape");
        }
        auto& a = adjoint(t.node());
        return TensorT<S>::from(t.shape(), a);
    }

    std::size_t num_nodes() const { return nodes_.size(); }
    bool consumed() const { return ran_backward_; }

private:
    TapeT() = default;

    struct Node {
        std::size_t numel;
        Pull pull;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<S>> adjoints_;
    bool ran_backward_ = false;
};

using Tape = TapeT<double>;
using Tape32 = TapeT<float>;

} // namespace idol::diff
