#pragma once

// Scene encoder: past and current observations plus ego history to a
// sequence of BEV states in the t = 0 ego frame.

#include "bev.hpp"
#include "model_config.hpp"

#include <vector>

namespace rw {

struct EncoderParams {
    Conv conv1;  // obs channels -> dim/2, 3x3
    Conv conv2;  // dim/2 -> dim, 3x3
    Conv out;    // dim -> dim, 1x1
    Mlp action;  // (dx, dy, yaw) -> dim, shared with the predictor

    EncoderParams() = default;
    EncoderParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng);
};

// Motion features fed to the action embedder: translation in cells and yaw.
Tensor motion_features(const EgoMotion& m, const WorldConfig& cfg);

// Ego delta at frame t, or zero motion when frame t-1 is not in the window.
EgoMotion delta_or_zero(const EgoTrajectory& traj, int t);

// One embedding per consecutive delta of the window: frames
// [first+1, last] of `traj` restricted to [from, to]. Fails when the window
// holds fewer than two frames.
std::vector<Var> embed_actions(const EgoTrajectory& traj, int from, int to, const EncoderParams& p,
                               const WorldConfig& cfg);

// Embedding of a single frame's delta (zero motion before the window).
Var embed_action(const EgoTrajectory& traj, int t, const EncoderParams& p, const WorldConfig& cfg);

std::vector<BEVState> encode_scene(const std::vector<Observation>& obs, const EgoTrajectory& ego,
                                   const EncoderParams& p, const WorldConfig& cfg);

// Encodes one observation rendered in the ego frame of `t` into the t = 0
// frame.
BEVState encode_frame(const Observation& obs, const EgoTrajectory& ego, const EncoderParams& p,
                      const WorldConfig& cfg);

}  // namespace rw
