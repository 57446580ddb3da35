#pragma once

// Autoregressive residual predictor with streaming memory and feature
// alignment.

#include "attention.hpp"
#include "encoder.hpp"

#include <deque>
#include <functional>
#include <optional>

namespace rw {

// FIFO of the most recent aligned states, oldest first.
class StreamMemory {
public:
    explicit StreamMemory(int capacity = 3);

    // Evicts the oldest slot when full. Timestamps must strictly increase.
    void push(BEVState state);
    int capacity() const { return capacity_; }
    int size() const { return static_cast<int>(slots_.size()); }
    bool empty() const { return slots_.empty(); }
    const BEVState& oldest() const;
    const BEVState& latest() const;
    const std::deque<BEVState>& slots() const { return slots_; }
    std::vector<int> timestamps() const;

private:
    int capacity_;
    std::deque<BEVState> slots_;
};

struct PredictorLayer {
    DeformableAttention self_deform;
    DeformableAttention cross_deform;
    DenseAttention self_dense;
    DenseAttention cross_dense;
    Var lag_embedding;             // [memory, dim], dense attention only
    std::vector<Linear> action;    // per lag: 0 = target frame, k = k frames back
    DenseAttention action_attn;    // cross-attention conditioning only
    Linear ffn1;
    Linear ffn2;
};

struct PredictorParams {
    Var queries;  // [bev_h * bev_w, dim]
    std::vector<PredictorLayer> layers;
    Linear out;

    PredictorParams() = default;
    PredictorParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng);
};

struct AlignParams {
    Mlp occ_head;       // dim -> num_classes logits
    Linear gamma_occ;   // num_classes -> dim
    Linear beta_occ;
    Linear gamma_motion;  // 3 -> dim
    Linear beta_motion;
    double eps = 1e-5;

    AlignParams() = default;
    AlignParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng);
};

// `actions` holds one embedding per memory frame, oldest first, followed by
// the embedding of the target frame.
Var predict_residual(const StreamMemory& memory, const std::vector<Var>& actions, const PredictorParams& p,
                     const ModelConfig& model, const WorldConfig& world);

// Adds the residual to the previous state; the result carries the next
// timestamp and the previous pose until the caller updates it.
BEVState compose_state(const Var& delta, const BEVState& prev);

struct AlignResult {
    BEVState aligned;
    Var occ_logits;  // [bev_h * bev_w, num_classes]
    Var occ_probs;
};

AlignResult align_features(const BEVState& state, const EgoMotion& motion, const AlignParams& p,
                           const WorldConfig& world);

struct Dynamics {
    const EncoderParams& encoder;
    const PredictorParams& predictor;
    const AlignParams& align;
    const ModelConfig& model;
    const WorldConfig& world;
};

struct StepResult {
    BEVState state;       // aligned state for the new frame
    Var align_logits;     // undefined when alignment is off
};

// Predicts the aligned state of the frame after memory.latest() using ego
// motion from `traj`, without touching memory.
StepResult predict_step(const StreamMemory& memory, const EgoTrajectory& traj, const Dynamics& dyn);

// predict_step followed by pushing the new state into memory.
StepResult rollout_step(StreamMemory& memory, const EgoTrajectory& traj, const Dynamics& dyn);

// Runs `steps` rollout steps. With advance_memory false the caller's memory
// is left untouched.
std::vector<StepResult> rollout(StreamMemory& memory, const EgoTrajectory& traj, int steps, const Dynamics& dyn,
                                bool advance_memory = true);

}  // namespace rw
