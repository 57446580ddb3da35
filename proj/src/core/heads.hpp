#pragma once

// Occupancy decoder, planning head, candidate sampler, safety cost filter and
// the three forecasting/planning coupling schemes.

#include "geometry.hpp"
#include "predictor.hpp"

#include <functional>
#include <optional>

namespace rw {

struct OccHeadParams {
    Mlp mlp;  // dim -> dim -> z_bins * num_classes

    OccHeadParams() = default;
    OccHeadParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng);
};

// Per-voxel logits [bev_h * bev_w * z_bins, num_classes] in (i, j, z) order.
Var decode_occupancy(const BEVState& state, const OccHeadParams& p, const WorldConfig& world);
// Argmax with lowest-index tie-breaking.
SemanticOccGrid argmax_grid(const Tensor& logits, const WorldConfig& world, int timestamp);

struct PlanHeadParams {
    Var queries;        // [f_future, dim], one per horizon step
    Var commands;       // [3, dim]
    Linear input;       // [query, command, candidate token] -> dim
    Linear pose;        // 2 -> dim
    Linear candidate;   // 2 * f_future -> dim
    Conv adapter1;      // dim -> dim/4, 3x3
    Conv adapter2;      // dim/4 -> dim, 1x1, zero-initialized
    Var positions;      // [bev_h * bev_w, dim]
    Linear q, k, v, o;
    Linear ffn1, ffn2;
    Mlp out;            // dim -> dim -> 2
    int heads = 4;

    PlanHeadParams() = default;
    PlanHeadParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng);
};

// Metric pose normalization used by the plan head's pose and candidate inputs.
double plan_scale(const WorldConfig& world);

struct PlanStep {
    Var delta;  // [1, 2] metres
    Vec2 pose;  // pose + delta
};

// One decoder pass for horizon step `step` (0-based). `candidate` is the
// selected candidate in tight mode, as waypoints relative to `pose`.
PlanStep plan_step(const BEVState& state, Command command, Vec2 pose, const PlanHeadParams& p,
                   const WorldConfig& world, int step = 0, const std::vector<Vec2>* candidate = nullptr);

// All f_future deltas [f, 2] from one pass over a single state.
Var plan_all_steps(const BEVState& state, Command command, Vec2 pose, const PlanHeadParams& p,
                   const WorldConfig& world);

struct SamplerConfig {
    std::vector<double> speeds{2.0, 3.0, 4.0};  // m/s
    std::vector<double> curvatures{-0.3, -0.25, -0.2, -0.15, -0.1, -0.05, 0.0,
                                   0.05, 0.1,   0.15,  0.2,  0.25,  0.3};  // 1/m, signed
    double straight_band = 0.05;
    double deviation_weight = 0.1;  // per radian of command deviation

    void validate() const;
};

// Constant-speed, constant-curvature rollouts from `origin`; frames
// 1..f_future. Curvatures are filtered by command: LEFT keeps k >= 0, RIGHT
// k <= 0, STRAIGHT |k| <= straight_band. Candidate index is
// speed_index * kept_curvatures + curvature_index.
std::vector<EgoTrajectory> sample_candidates(Command command, const SamplerConfig& cfg, const WorldConfig& world,
                                             const Pose& origin = {});

// Heading change penalty for a candidate ending at heading change `dtheta`.
double command_deviation(Command command, double dtheta);

struct CostResult {
    int best = 0;
    std::vector<double> costs;
};

// probs: [bev_h * bev_w * z_bins, num_classes] class probabilities.
// Occupied mass excludes free and road (drivable) probability.
CostResult cost_filter(const std::vector<EgoTrajectory>& candidates, const Tensor& probs, Command command,
                       const SamplerConfig& cfg, const WorldConfig& world, const Pose& origin = {});

struct PlanResult {
    EgoTrajectory trajectory;  // frames 1..f_future
    std::vector<Vec2> deltas;
    Var positions;             // [f, 2], differentiable when recorded with grad
    // Tight mode only: per step candidate costs and selection.
    std::vector<std::vector<double>> candidate_costs;
    std::vector<int> selected;
    std::vector<std::vector<Vec2>> selected_candidates;
    double latency_ms = 0.0;
    double rollout_ms = 0.0;
    int rollout_calls = 0;
};

// Returns the state for frame t given the planned trajectory so far
// (history plus frames 1..t).
using StateRoller = std::function<BEVState(const EgoTrajectory& planned, int t)>;

struct PlanInputs {
    const BEVState& current;            // S_0
    const EgoTrajectory& history;       // frames -h_past .. 0
    const std::vector<Command>& commands;  // frames 1 .. f_future
};

PlanResult plan_episode(const PlanInputs& in, Coupling mode, const PlanHeadParams& plan, const OccHeadParams& occ,
                        const SamplerConfig& sampler, const WorldConfig& world, const StateRoller& roller);

}  // namespace rw
