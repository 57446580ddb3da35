#include "attention.hpp"

#include "error.hpp"

#include <cmath>
#include <numbers>

namespace rw {

Var grouped_softmax(const Var& x, int group)
{
    const auto shape = x.shape();
    const int n = x.value().rows();
    const int c = x.value().cols();
    check(c % group == 0, ErrorCode::internal, "grouped_softmax: width not divisible by group");
    return ag::reshape(ag::softmax_rows(ag::reshape(x, {n * (c / group), group})), shape);
}

Var multihead_attention(const Var& q, const Var& k, const Var& v, int heads)
{
    const int d = q.value().cols();
    check(d % heads == 0, ErrorCode::internal, "multihead_attention: width not divisible by heads");
    const int hd = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const Var qh = heads == 1 ? q : ag::slice_cols(q, h * hd, hd);
        const Var kh = heads == 1 ? k : ag::slice_cols(k, h * hd, hd);
        const Var vh = heads == 1 ? v : ag::slice_cols(v, h * hd, hd);
        const Var att = ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), scale));
        outs.push_back(ag::matmul(att, vh));
    }
    return heads == 1 ? outs.front() : ag::concat_cols(outs);
}

DeformableAttention::DeformableAttention(ParamSet& ps, const std::string& name, int dim, int heads_, int points_,
                                         int sources, Rng& rng)
    : heads(heads_), points(points_), value(ps, name + ".value", dim, dim, rng)
{
    for (int s = 0; s < sources; ++s) {
        const std::string src = name + ".src" + std::to_string(s);
        // Offsets start as a fixed ray pattern: head h looks along direction
        // 2*pi*h/heads at distances 0..points-1 cells.
        Linear off(ps, src + ".offsets", dim, heads * points * 2, rng, Init::zeros);
        Tensor& bias = off.b.mutable_value();
        for (int h = 0; h < heads; ++h) {
            const double a = 2.0 * std::numbers::pi * h / heads;
            for (int p = 0; p < points; ++p) {
                const std::size_t i = (static_cast<std::size_t>(h) * points + p) * 2;
                bias[i] = std::sin(a) * p;
                bias[i + 1] = std::cos(a) * p;
            }
        }
        offsets.push_back(off);
        weights.push_back(Linear(ps, src + ".weights", dim, heads * points, rng, Init::zeros));
    }
    out = Linear(ps, name + ".out", dim, dim, rng);
}

Var DeformableAttention::operator()(const Var& query, const std::vector<Var>& sources, int height,
                                    int width) const
{
    const int n = height * width;
    const int ns = static_cast<int>(sources.size());
    check(ns >= 1 && ns <= static_cast<int>(offsets.size()), ErrorCode::invalid_argument,
          "deformable attention: unsupported number of sources");
    check(query.value().rows() == n, ErrorCode::shape_mismatch, "deformable attention: query grid mismatch");
    const int hp = heads * points;

    Tensor ref({n, hp * 2});
    for (int q = 0; q < n; ++q)
        for (int k = 0; k < hp; ++k) {
            ref[(static_cast<std::size_t>(q) * hp + k) * 2] = q / width;
            ref[(static_cast<std::size_t>(q) * hp + k) * 2 + 1] = q % width;
        }
    const Var refv = ag::constant(std::move(ref));

    // Joint softmax per head over (source, point): lay logits out as
    // [n*heads, ns*points].
    std::vector<Var> logits;
    for (int s = 0; s < ns; ++s)
        logits.push_back(ag::reshape(weights[static_cast<std::size_t>(s)](query), {n * heads, points}));
    const Var joint = ag::softmax_rows(ns == 1 ? logits.front() : ag::concat_cols(logits));

    Var acc;
    for (int s = 0; s < ns; ++s) {
        const Var w = ag::reshape(ns == 1 ? joint : ag::slice_cols(joint, s * points, points), {n, hp});
        const Var loc = ag::add(refv, offsets[static_cast<std::size_t>(s)](query));
        const Var sampled =
            ag::deform_sample(value(sources[static_cast<std::size_t>(s)]), height, width, heads, loc, w);
        acc = acc.defined() ? ag::add(acc, sampled) : sampled;
    }
    return out(acc);
}

DenseAttention::DenseAttention(ParamSet& ps, const std::string& name, int dim, int heads_, Rng& rng)
    : heads(heads_),
      q(ps, name + ".q", dim, dim, rng),
      k(ps, name + ".k", dim, dim, rng),
      v(ps, name + ".v", dim, dim, rng),
      out(ps, name + ".out", dim, dim, rng)
{
}

Var DenseAttention::operator()(const Var& query, const Var& keys) const
{
    return out(multihead_attention(q(query), k(keys), v(keys), heads));
}

}  // namespace rw
