#pragma once

// Finite-difference gradient checking and small fixtures shared by the unit
// tests and the acceptance runner.

#include "nn.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace rw::testing {

struct GradCheck {
    double max_rel_error = 0.0;
    std::string worst;  // probe with the largest error
    int entries = 0;    // coordinates compared
    int vanishing = 0;  // probes whose gradient is zero up to rounding
};

constexpr double kVanishingGradient = 1e-7;

// Sum of out * R for a fixed random R, turning any output into a scalar with
// a generic upstream gradient.
inline ag::Var project(const ag::Var& out, std::uint64_t seed)
{
    Rng rng(seed);
    Tensor r(out.shape());
    for (auto& v : r.values()) v = rng.uniform(-1.0, 1.0);
    return ag::sum(ag::mul(out, ag::constant(std::move(r))));
}

// Compares the analytic gradient of fn() with respect to each probe against
// central differences on at most `max_entries` evenly spread coordinates.
// fn must rebuild its graph from the current probe values on every call.
// The per-probe error is ||a - n|| / (||a|| + ||n||).
inline GradCheck grad_check(const std::function<ag::Var()>& fn,
                            const std::vector<std::pair<std::string, ag::Var>>& probes, int max_entries = 16,
                            double h = 1e-6)
{
    for (auto p : probes) p.second.zero_grad();
    ag::backward(fn());
    GradCheck result;
    for (auto [name, var] : probes) {
        const std::size_t n = var.size();
        const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(max_entries));
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t idx = count == n ? k : k * n / count;
            double& x = var.mutable_value().values()[idx];
            const double saved = x;
            x = saved + h;
            const double up = fn().item();
            x = saved - h;
            const double down = fn().item();
            x = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = var.grad().values()[idx];
            diff2 += (analytic - numeric) * (analytic - numeric);
            a2 += analytic * analytic;
            n2 += numeric * numeric;
            ++result.entries;
        }
        // Parameters the output is invariant to (a key bias under softmax, a
        // weight fed by a zero input) leave only rounding noise in the central
        // difference; both norms then sit below the floor.
        if (std::max(std::sqrt(a2), std::sqrt(n2)) < kVanishingGradient) {
            ++result.vanishing;
            continue;
        }
        const double err = std::sqrt(diff2) / (std::sqrt(a2) + std::sqrt(n2));
        if (err >= result.max_rel_error) {
            result.max_rel_error = err;
            result.worst = name;
        }
    }
    return result;
}

// Adds noise to every parameter so zero-initialized blocks carry gradient and
// sampling locations leave the integer lattice.
inline void jitter_params(ParamSet& ps, std::uint64_t seed, double scale = 0.1)
{
    Rng rng(seed);
    for (auto& e : ps.entries())
        for (auto& v : e.var.mutable_value().values()) v += scale * rng.normal();
}

inline ag::Var random_leaf(std::vector<int> shape, std::uint64_t seed, double scale = 1.0)
{
    Rng rng(seed);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = scale * rng.normal();
    return ag::Var::leaf(std::move(t));
}

// Probes for every parameter of a registry.
inline std::vector<std::pair<std::string, ag::Var>> param_probes(const ParamSet& ps)
{
    std::vector<std::pair<std::string, ag::Var>> out;
    for (const auto& e : ps.entries()) out.emplace_back(e.name, e.var);
    return out;
}

}  // namespace rw::testing
