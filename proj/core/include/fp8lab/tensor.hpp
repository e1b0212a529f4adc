// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense tensor with reverse-mode autodiff. Values are row-major;
// the tape is the implicit graph of parent links plus per-node backward
// closures. The scalar type is a template parameter so the whole engine can
// run in 64-bit mode for gradient verification.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

namespace fp8lab {

// std::vector that default-initializes trivial elements on resize, so fully
// overwritten buffers (GEMM outputs, quantized copies) skip the zero pass.
// Zero-filling still happens wherever assign() is used.
template <class T>
class uninit_allocator : public std::allocator<T> {
public:
    using std::allocator<T>::allocator;
    template <class U>
    struct rebind {
        using other = uninit_allocator<U>;
    };
    template <class U>
    void construct(U*) noexcept {}
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

template <class T>
using Buffer = std::vector<T, uninit_allocator<T>>;

template <class Real>
struct TensorNode {
    std::vector<int> shape;
    Buffer<Real> value;
    Buffer<Real> grad;  // empty until touched by backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) {
            grad.assign(value.size(), Real(0));
        }
    }
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) {
            throw std::invalid_argument("negative dimension");
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

template <class Real>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode<Real>> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<int> shape) {
        auto n = std::make_shared<TensorNode<Real>>();
        n->value.assign(shape_numel(shape), Real(0));
        n->shape = std::move(shape);
        return Tensor(std::move(n));
    }

    static Tensor full(std::vector<int> shape, Real v) {
        Tensor t = zeros(std::move(shape));
        for (auto& x : t.data()) x = v;
        return t;
    }

    static Tensor from_data(std::vector<int> shape, std::vector<Real> data) {
        if (shape_numel(shape) != data.size()) {
            throw std::invalid_argument("data length does not match shape");
        }
        auto n = std::make_shared<TensorNode<Real>>();
        n->shape = std::move(shape);
        n->value.assign(data.begin(), data.end());
        return Tensor(std::move(n));
    }

    static Tensor randn(std::vector<int> shape, Real stddev, std::mt19937_64& rng) {
        Tensor t = zeros(std::move(shape));
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& x : t.data()) x = static_cast<Real>(dist(rng)) * stddev;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int dim(int i) const {
        const auto& s = node_->shape;
        return s.at(i < 0 ? s.size() + static_cast<std::size_t>(i) : static_cast<std::size_t>(i));
    }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    std::size_t numel() const { return node_->numel(); }

    Buffer<Real>& data() { return node_->value; }
    const Buffer<Real>& data() const { return node_->value; }
    Buffer<Real>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const Buffer<Real>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }

    Tensor& set_requires_grad(bool b = true) {
        node_->requires_grad = b;
        return *this;
    }
    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad() {
        if (!node_->grad.empty()) {
            node_->grad.assign(node_->value.size(), Real(0));
        }
    }

    Real item() const {
        if (numel() != 1) {
            throw std::logic_error("item() requires a scalar tensor");
        }
        return node_->value[0];
    }

    std::shared_ptr<TensorNode<Real>> node() const { return node_; }

private:
    std::shared_ptr<TensorNode<Real>> node_;
};

// Populates gradients of every tensor reachable from `loss` (which must be
// scalar) in a single reverse-topological sweep. Accumulation order is fixed
// by graph construction order, so repeated runs are bit-identical.
template <class Real>
void backward(const Tensor<Real>& loss) {
    if (loss.numel() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar");
    }
    using Node = TensorNode<Real>;
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    std::unordered_set<Node*> seen;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) {
            node->backward_fn(*node);
        }
    }
}

}  // namespace fp8lab
