#pragma once

// Per-episode forward passes shared by training and evaluation.

#include "model.hpp"
#include "objectives.hpp"

namespace rw {

struct EpisodeForwardOptions {
    Coupling coupling = Coupling::semi;
    LossWeights weights;
    // Probability that memory receives the ground-truth-encoded state of a
    // frame instead of the model's own prediction.
    double teacher_prob = 0.0;
    Rng* sampling = nullptr;  // required when 0 < teacher_prob < 1
    SamplerConfig sampler;
};

struct EpisodeLoss {
    LossTotal total;
    double plan_l2 = 0.0;
    double collision = 0.0;
    int outside_waypoints = 0;
    int teacher_steps = 0;
};

// Noiseless rendering of frame t encoded into the t = 0 frame.
BEVState encode_privileged(const WorldModel& m, const SceneEpisode& ep, int t);

// Fills memory with the encoded history and returns S_0 (memory.latest()).
StreamMemory initial_memory(const WorldModel& m, const std::vector<BEVState>& encoded);

// Builds the joint objective for one episode. Gradients are recorded when
// enabled by the caller.
EpisodeLoss episode_loss(const WorldModel& m, const SceneEpisode& ep, const EpisodeForwardOptions& opt);

}  // namespace rw
