#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "compenkit/errors.hpp"

namespace compenkit {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel_of(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

// Reverse-mode autodiff node. Tensors are thin shared handles to these.
template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad; // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    std::span<T> grad_buf() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

// When false, ops do not record the backward graph (inference mode).
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
    bool prev_;
};

/// Dense N-d tensor (NCHW convention for images) with optional gradient.
template <typename T>
class TensorT {
public:
    using Scalar = T;

    TensorT() = default;
    explicit TensorT(std::shared_ptr<TensorNode<T>> n) : node_(std::move(n)) {}

    static TensorT zeros(Shape shape) { return filled(std::move(shape), T(0)); }

    static TensorT filled(Shape shape, T value) {
        auto n = std::make_shared<TensorNode<T>>();
        n->data.assign(static_cast<std::size_t>(numel_of(shape)), value);
        n->shape = std::move(shape);
        return TensorT(std::move(n));
    }

    static TensorT from_data(Shape shape, std::vector<T> values) {
        if (numel_of(shape) != static_cast<std::int64_t>(values.size()))
            throw ShapeError("from_data: " + shape_str(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
        auto n = std::make_shared<TensorNode<T>>();
        n->shape = std::move(shape);
        n->data = std::move(values);
        return TensorT(std::move(n));
    }

    static TensorT scalar(T value) { return filled({1}, value); }

    static TensorT randn(Shape shape, std::mt19937& rng, T stddev = T(1)) {
        auto t = zeros(std::move(shape));
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& v : t.node()->data) v = static_cast<T>(dist(rng)) * stddev;
        return t;
    }

    static TensorT rand_uniform(Shape shape, std::mt19937& rng, T lo = T(0), T hi = T(1)) {
        auto t = zeros(std::move(shape));
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : t.node()->data) v = static_cast<T>(dist(rng));
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->numel(); }
    std::int64_t dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }
    T item() const {
        if (numel() != 1) throw ArgumentError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    TensorT& set_requires_grad(bool on = true) {
        node_->requires_grad = on;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<T> grad() { return node_->grad_buf(); }
    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }

    const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

    /// Detached copy: same values, no graph history.
    TensorT detach() const {
        auto n = std::make_shared<TensorNode<T>>();
        n->shape = node_->shape;
        n->data = node_->data;
        return TensorT(std::move(n));
    }

    bool all_finite() const {
        for (T v : node_->data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

using Tensor = TensorT<float>;

/// Named learnable tensor. Names must be unique within a model.
template <typename T>
struct ParamT {
    std::string name;
    TensorT<T> tensor;
};

using Param = ParamT<float>;

namespace detail {

// Creates the result node of an op; wiring to parents happens only when the
// graph is being recorded and some input needs gradients.
template <typename T>
TensorT<T> make_result(Shape shape, std::vector<TensorT<T>> inputs,
                       std::function<void(TensorNode<T>&)> backward) {
    auto n = std::make_shared<TensorNode<T>>();
    n->data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
    n->shape = std::move(shape);
    if (grad_enabled()) {
        bool needs = false;
        for (const auto& in : inputs) needs = needs || in.requires_grad();
        if (needs) {
            n->requires_grad = true;
            for (auto& in : inputs) n->parents.push_back(in.node());
            n->backward_fn = std::move(backward);
        }
    }
    return TensorT<T>(std::move(n));
}

} // namespace detail

/// Populates grads of every requires_grad tensor reachable from `loss`.
/// Grad accumulation adds; call zero_grad between steps.
template <typename T>
void backward(TensorT<T> loss) {
    if (loss.numel() != 1) throw ArgumentError("backward: loss must be scalar, got " + shape_str(loss.shape()));

    // Topological order by iterative DFS.
    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> visited;
    struct Frame {
        TensorNode<T>* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (loss.node()->requires_grad) stack.push_back({loss.node().get(), 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent == 0) {
            if (visited.count(f.node)) {
                stack.pop_back();
                continue;
            }
            visited.insert(f.node);
        }
        if (f.next_parent < f.node->parents.size()) {
            TensorNode<T>* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    loss.node()->grad_buf()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode<T>* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

} // namespace compenkit
