#include "nn.hpp"

#include "error.hpp"

#include <cmath>

namespace rw {

Var ParamSet::create(const std::string& name, Tensor init)
{
    check(find(name) == nullptr, ErrorCode::internal, "duplicate parameter " + name);
    entries_.push_back({name, Var::leaf(std::move(init))});
    return entries_.back().var;
}

std::size_t ParamSet::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.var.size();
    return n;
}

void ParamSet::zero_grad()
{
    for (auto& e : entries_) e.var.zero_grad();
}

const Var* ParamSet::find(const std::string& name) const
{
    for (const auto& e : entries_)
        if (e.name == name) return &e.var;
    return nullptr;
}

Tensor normal_tensor(std::vector<int> shape, double stddev, Rng& rng)
{
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = stddev * rng.normal();
    return t;
}

Linear::Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng, Init init, double bias_fill)
{
    w = ps.create(name + ".w", init == Init::zeros ? Tensor({in, out}, 0.0)
                                                   : normal_tensor({in, out}, 1.0 / std::sqrt(in), rng));
    b = ps.create(name + ".b", Tensor({out}, bias_fill));
}

Mlp::Mlp(ParamSet& ps, const std::string& name, int in, int hidden, int out, Rng& rng, Init last)
    : fc1(ps, name + ".fc1", in, hidden, rng), fc2(ps, name + ".fc2", hidden, out, rng, last)
{
}

Conv::Conv(ParamSet& ps, const std::string& name, int cin, int cout, int k, Rng& rng, Init init) : kernel(k)
{
    const int fan_in = k * k * cin;
    w = ps.create(name + ".w", init == Init::zeros ? Tensor({fan_in, cout}, 0.0)
                                                   : normal_tensor({fan_in, cout}, 1.0 / std::sqrt(fan_in), rng));
    b = ps.create(name + ".b", Tensor({cout}, 0.0));
}

Var Conv::operator()(const Var& x, int height, int width) const
{
    ag::ConvGeometry geo{height, width, kernel, 1, kernel / 2};
    return ag::conv2d(x, w, b, geo);
}

}  // namespace rw
