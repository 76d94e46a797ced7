#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "cpm/array.hpp"

namespace cpm::ad {

class Tape;

// Lightweight handle to a node on a Tape.
class Tensor {
public:
    Tensor() = default;
    const Array& value() const;
    const Array& grad() const;
    Tape& tape() const { return *tape_; }
    int index() const { return idx_; }

private:
    friend class Tape;
    Tensor(Tape* t, int i) : tape_(t), idx_(i) {}
    Tape* tape_ = nullptr;
    int idx_ = -1;
};

// Record of operations in execution order (which is a topological order by
// construction). backward() walks it exactly in reverse; gradients
// accumulate additively. A Tape is single-threaded; independent Tapes may
// run concurrently.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf referencing caller-owned storage; the array must outlive the
    // tape. Used for model parameters so forward passes never copy them.
    Tensor leaf_ref(const Array& external, bool requires_grad);
    Tensor leaf(Array owned, bool requires_grad);
    Tensor constant(Array owned) { return leaf(std::move(owned), false); }

    // Reverse-mode sweep from a scalar loss. Throws NotScalarError if the
    // loss has more than one element. Parameters not reached by the loss
    // keep zero gradients.
    void backward(Tensor loss);

    const Array& value(int idx) const { return *nodes_[idx].val; }
    const Array& grad(int idx) const;
    std::size_t size() const { return nodes_.size(); }

    // -- op builder interface --
    using Backprop = std::function<void(Tape&, int)>;
    Tensor emplace(Array value, bool requires_grad, Backprop fn);
    // Gradient accumulation buffer, allocated (zeroed) on first touch.
    Array& grad_buffer(int idx);
    bool has_grad(int idx) const { return nodes_[idx].grad_alloc; }
    bool requires_grad(int idx) const { return nodes_[idx].requires_grad; }

private:
    struct Node {
        Array owned;
        const Array* val = nullptr;
        Array grad;
        bool requires_grad = false;
        bool grad_alloc = false;
        Backprop backprop;
    };
    // deque: node addresses must stay stable, val may point at owned.
    std::deque<Node> nodes_;
    static const Array empty_grad_;
};

// Elementwise; b must match a's shape, or be rank-1 matching a's column
// count, in which case it broadcasts over rows (leading dimension only).
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor multiply(Tensor a, Tensor b);
Tensor scale(Tensor a, double c);

Tensor matmul(Tensor a, Tensor b);
Tensor transpose(Tensor a);
Tensor relu(Tensor a);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(Tensor a, int axis, std::size_t start, std::size_t len);
Tensor softmax(Tensor a);  // along the last dimension (per row)
Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps = 1e-5);
Tensor reduce_mean(Tensor a, int axis);  // 2-D -> (1,n) for axis 0, (m,1) for axis 1
Tensor reduce_max(Tensor a, int axis);
Tensor mean_all(Tensor a);  // -> scalar

Tensor linear(Tensor x, Tensor w, Tensor b);

// Scaled dot-product attention over the rows of x; wq/wk/wv project to
// heads * head_dim columns, wo projects back.
Tensor multi_head_attention(Tensor x, Tensor wq, Tensor wk, Tensor wv, Tensor wo, int heads);

// Mean over elements of the Huber penalty on (pred - target).
Tensor huber_loss(Tensor pred, const Array& target, double delta);
Tensor mse_loss(Tensor pred, const Array& target);

// Max over coordinates of |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|),
// comparing reverse-mode gradients with central differences of step h.
double finite_diff_check(const std::function<Tensor(Tape&, Tensor)>& f, const Array& x,
                         double h = 1e-6);

inline const Array& Tensor::value() const { return tape_->value(idx_); }
inline const Array& Tensor::grad() const { return tape_->grad(idx_); }

}  // namespace cpm::ad
