#include "autograd.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace rw::ag {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const std::vector<int>& shape)
{
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

Tensor::Tensor(std::vector<int> shape, Real fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill)
{
}

Tensor::Tensor(std::vector<int> shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end())
{
    if (data_.size() != shape_numel(shape_))
        throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape_));
}

int Tensor::dim(int axis) const
{
    if (axis < 0) axis += rank();
    return shape_.at(static_cast<std::size_t>(axis));
}

int Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

int Tensor::rows() const
{
    const int c = cols();
    return c == 0 ? 0 : static_cast<int>(data_.size() / static_cast<std::size_t>(c));
}

void Tensor::reshape(std::vector<int> shape)
{
    if (shape_numel(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    shape_ = std::move(shape);
}

void Tensor::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const
{
    for (Real v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor& Node::grad_buffer()
{
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>())
{
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Real Var::item() const
{
    if (node_->value.size() != 1) throw std::logic_error("item() on non-scalar " + shape_str(shape()));
    return node_->value[0];
}

void Var::zero_grad()
{
    if (node_ && node_->grad.size() > 0) node_->grad.fill(0.0);
}

namespace {
template <class Range>
Var build(Tensor value, const Range& parents, std::function<void(Node&)> fn)
{
    bool any = false;
    if (g_grad_enabled)
        for (const Var& p : parents) any = any || p.requires_grad();
    Var out(std::move(value), any);
    if (any) {
        auto& node = *out.node();
        node.parents.reserve(parents.size());
        for (const Var& p : parents) node.parents.push_back(p.node());
        node.backward = std::move(fn);
    }
    return out;
}
}  // namespace

Var make_result(Tensor value, std::initializer_list<Var> parents, std::function<void(Node&)> backward)
{
    return build(std::move(value), parents, std::move(backward));
}

Var make_result_list(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> backward)
{
    return build(std::move(value), parents, std::move(backward));
}

void backward(const Var& root)
{
    if (!root.defined()) throw std::logic_error("backward on undefined Var");
    if (root.size() != 1) throw std::logic_error("backward requires a scalar root");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace rw::ag
