#pragma once

// Latent BEV states and the rigid warp between ego frames.

#include "gridworld.hpp"
#include "nn.hpp"

namespace rw {

struct BEVState {
    Var features;  // [bev_h * bev_w, dim]
    int timestamp = 0;
    Pose pose;
    bool aligned = false;

    int dim() const { return features.value().cols(); }
};

// Resamples a [bev_h * bev_w, C] map so that output cell p reads the input at
// R(yaw) p + translation (metres), with bilinear weights and zeros outside
// the window. Translating by +1 cell along x moves content from column j to
// column j - 1.
Var warp_features(const Var& features, const WorldConfig& cfg, const EgoMotion& motion);
BEVState warp_bev(const BEVState& state, const WorldConfig& cfg, const EgoMotion& motion);

}  // namespace rw
