#pragma once

#include "nn.hpp"

#include <vector>

namespace rw {

// Scaled dot-product attention with `heads` heads. q is [nq, d]; k and v are
// [nk, d]. Projections are the caller's responsibility.
Var multihead_attention(const Var& q, const Var& k, const Var& v, int heads);

// Softmax over the last axis in groups of `group` columns: x[n, g*group].
Var grouped_softmax(const Var& x, int group);

// Deformable attention of BEV queries over one or more value maps sharing a
// grid. Each source has its own offset and weight projections; weights are
// normalized jointly over sources and points per head.
struct DeformableAttention {
    int heads = 0;
    int points = 0;
    Linear value;
    std::vector<Linear> offsets;  // per source: dim -> heads*points*2
    std::vector<Linear> weights;  // per source: dim -> heads*points
    Linear out;

    DeformableAttention() = default;
    DeformableAttention(ParamSet& ps, const std::string& name, int dim, int heads, int points, int sources,
                        Rng& rng);

    // query [H*W, dim]; sources.size() <= number of configured sources.
    // Reference points are the query cells themselves.
    Var operator()(const Var& query, const std::vector<Var>& sources, int height, int width) const;
};

struct DenseAttention {
    int heads = 0;
    Linear q;
    Linear k;
    Linear v;
    Linear out;

    DenseAttention() = default;
    DenseAttention(ParamSet& ps, const std::string& name, int dim, int heads, Rng& rng);
    Var operator()(const Var& query, const Var& keys) const;
};

}  // namespace rw
