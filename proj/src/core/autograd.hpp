#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// A Var wraps a shared graph node. Ops record their parents and a backward
// closure only when gradient recording is enabled and at least one input
// requires a gradient, so inference paths build no graph.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace rw::ag {

using Real = double;

// Vectorized reductions split their work at the first aligned element, so
// the rounding of a sum depends on where the buffer starts. A fixed 64-byte
// alignment makes results independent of the heap layout.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

using Storage = std::vector<Real, AlignedAllocator<Real>>;

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, Real fill = 0.0);
    Tensor(std::vector<int> shape, std::vector<Real> data);

    static Tensor scalar(Real v) { return Tensor({1}, std::vector<Real>{v}); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int axis) const;
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }
    Storage& values() { return data_; }
    const Storage& values() const { return data_; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }

    // Row count and trailing width when viewed as a 2D matrix [rows, last].
    int rows() const;
    int cols() const;

    void reshape(std::vector<int> shape);
    void fill(Real v);
    bool all_finite() const;

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<int> shape_;
    Storage data_;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    // Lazily allocates the gradient buffer with the value's shape.
    Tensor& grad_buffer();
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    static Var leaf(Tensor value) { return Var(std::move(value), true); }

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad_buffer(); }
    Tensor& mutable_grad() { return node_->grad_buffer(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::vector<int>& shape() const { return node_->value.shape(); }
    std::size_t size() const { return node_->value.size(); }
    Real item() const;

    void zero_grad();
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    friend Var make_result(Tensor, std::initializer_list<Var>, std::function<void(Node&)>);
    friend Var make_result_list(Tensor, const std::vector<Var>&, std::function<void(Node&)>);
    std::shared_ptr<Node> node_;
};

// Builds an op output. The backward closure is dropped when recording is
// off or no parent requires a gradient.
Var make_result(Tensor value, std::initializer_list<Var> parents, std::function<void(Node&)> backward);
Var make_result_list(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> backward);

// Accumulates gradients of a scalar root into every reachable node that
// requires one.
void backward(const Var& root);

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace rw::ag
