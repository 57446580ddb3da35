#pragma once

// Parameter containers and small layers built on the autograd ops.

#include "ops.hpp"
#include "rng.hpp"

#include <string>
#include <vector>

namespace rw {

using ag::Tensor;
using ag::Var;

// Ordered, named parameter registry. Order is creation order and defines the
// checkpoint layout and the optimizer state layout.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Var var;
    };

    Var create(const std::string& name, Tensor init);
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }
    std::size_t scalar_count() const;
    void zero_grad();
    const Var* find(const std::string& name) const;

private:
    std::vector<Entry> entries_;
};

enum class Init { normal, zeros };

struct Linear {
    Var w;  // [in, out]
    Var b;  // [out]

    Linear() = default;
    Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng, Init init = Init::normal,
           double bias_fill = 0.0);
    Var operator()(const Var& x) const { return ag::linear(x, w, b); }
    int in() const { return w.value().dim(0); }
    int out() const { return w.value().dim(1); }
};

// Two-layer perceptron with a SiLU hidden activation.
struct Mlp {
    Linear fc1;
    Linear fc2;

    Mlp() = default;
    Mlp(ParamSet& ps, const std::string& name, int in, int hidden, int out, Rng& rng, Init last = Init::normal);
    Var operator()(const Var& x) const { return fc2(ag::silu(fc1(x))); }
};

struct Conv {
    Var w;  // [k*k*cin, cout]
    Var b;  // [cout]
    int kernel = 3;

    Conv() = default;
    Conv(ParamSet& ps, const std::string& name, int cin, int cout, int kernel, Rng& rng, Init init = Init::normal);
    // x is [height*width, cin]; stride 1, same padding.
    Var operator()(const Var& x, int height, int width) const;
};

Tensor normal_tensor(std::vector<int> shape, double stddev, Rng& rng);

}  // namespace rw
