#include "predictor.hpp"

#include "error.hpp"

#include <cmath>

namespace rw {

StreamMemory::StreamMemory(int capacity) : capacity_(capacity)
{
    check(capacity >= 1, ErrorCode::invalid_argument, "StreamMemory: capacity must be >= 1");
}

void StreamMemory::push(BEVState state)
{
    check(slots_.empty() || state.timestamp > slots_.back().timestamp, ErrorCode::invalid_argument,
          "StreamMemory: timestamps must strictly increase");
    if (static_cast<int>(slots_.size()) == capacity_) slots_.pop_front();
    slots_.push_back(std::move(state));
}

const BEVState& StreamMemory::oldest() const
{
    check(!slots_.empty(), ErrorCode::invalid_argument, "StreamMemory: empty");
    return slots_.front();
}

const BEVState& StreamMemory::latest() const
{
    check(!slots_.empty(), ErrorCode::invalid_argument, "StreamMemory: empty");
    return slots_.back();
}

std::vector<int> StreamMemory::timestamps() const
{
    std::vector<int> out;
    for (const auto& s : slots_) out.push_back(s.timestamp);
    return out;
}

PredictorParams::PredictorParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng)
{
    const int d = model.dim;
    queries = ps.create("predictor.queries", normal_tensor({world.cells(), d}, 1.0, rng));
    for (int l = 0; l < model.layers; ++l) {
        const std::string name = "predictor.layer" + std::to_string(l);
        PredictorLayer layer;
        if (model.attention == AttentionKind::deformable) {
            layer.self_deform = DeformableAttention(ps, name + ".self", d, model.heads, model.points, 1, rng);
            layer.cross_deform =
                DeformableAttention(ps, name + ".cross", d, model.heads, model.points, model.memory, rng);
        } else {
            layer.self_dense = DenseAttention(ps, name + ".self", d, model.heads, rng);
            layer.cross_dense = DenseAttention(ps, name + ".cross", d, model.heads, rng);
            layer.lag_embedding = ps.create(name + ".lag_embedding", normal_tensor({model.memory, d}, 0.1, rng));
        }
        for (int lag = 0; lag <= model.memory; ++lag)
            layer.action.push_back(Linear(ps, name + ".action" + std::to_string(lag), d, d, rng));
        if (model.conditioning == Conditioning::cross_attention)
            layer.action_attn = DenseAttention(ps, name + ".action_attn", d, model.heads, rng);
        layer.ffn1 = Linear(ps, name + ".ffn1", d, d * model.ffn_mult, rng);
        layer.ffn2 = Linear(ps, name + ".ffn2", d * model.ffn_mult, d, rng);
        layers.push_back(std::move(layer));
    }
    out = Linear(ps, "predictor.out", d, d, rng, model.zero_init_outputs ? Init::zeros : Init::normal);
}

AlignParams::AlignParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng)
    : occ_head(ps, "align.occ_head", model.dim, model.dim, world.num_classes, rng),
      gamma_occ(ps, "align.gamma_occ", world.num_classes, model.dim, rng, Init::zeros, 0.5),
      beta_occ(ps, "align.beta_occ", world.num_classes, model.dim, rng, Init::zeros, 0.0),
      gamma_motion(ps, "align.gamma_motion", 3, model.dim, rng, Init::zeros, 0.5),
      beta_motion(ps, "align.beta_motion", 3, model.dim, rng, Init::zeros, 0.0),
      eps(model.ln_eps)
{
}

namespace {

Var as_row(const Var& v) { return ag::reshape(v, {static_cast<int>(v.size())}); }

}  // namespace

Var predict_residual(const StreamMemory& memory, const std::vector<Var>& actions, const PredictorParams& p,
                     const ModelConfig& model, const WorldConfig& world)
{
    check(!memory.empty(), ErrorCode::invalid_argument, "predict_residual: empty memory");
    check(memory.size() <= model.memory, ErrorCode::invalid_argument,
          "predict_residual: memory larger than the configured capacity");
    check(static_cast<int>(actions.size()) == memory.size() + 1, ErrorCode::invalid_argument,
          "predict_residual: expected one action per memory frame plus the target frame");
    for (const auto& s : memory.slots())
        check(s.features.value().rows() == world.cells() && s.dim() == model.dim, ErrorCode::shape_mismatch,
              "predict_residual: memory state shape mismatch");
    const int h = world.bev_h;
    const int w = world.bev_w;
    const double eps = model.ln_eps;

    // Sources ordered most recent first so lag k uses projection k.
    std::vector<Var> sources;
    for (auto it = memory.slots().rbegin(); it != memory.slots().rend(); ++it) sources.push_back(it->features);
    const int n_act = static_cast<int>(actions.size());

    Var x = p.queries;
    for (const PredictorLayer& layer : p.layers) {
        Var xn = ag::layer_norm(x, eps);
        if (model.attention == AttentionKind::deformable) {
            x = ag::add(x, layer.self_deform(xn, {xn}, h, w));
            xn = ag::layer_norm(x, eps);
            x = ag::add(x, layer.cross_deform(xn, sources, h, w));
        } else {
            x = ag::add(x, layer.self_dense(xn, xn));
            xn = ag::layer_norm(x, eps);
            std::vector<Var> keys;
            for (std::size_t s = 0; s < sources.size(); ++s)
                keys.push_back(ag::add_row(
                    sources[s], as_row(ag::slice_rows(layer.lag_embedding, static_cast<int>(s), 1))));
            x = ag::add(x, layer.cross_dense(xn, keys.size() == 1 ? keys.front() : ag::concat_rows(keys)));
        }

        std::vector<Var> lagged;
        for (int k = 0; k < n_act; ++k) {
            const int lag = n_act - 1 - k;
            lagged.push_back(layer.action[static_cast<std::size_t>(lag)](actions[static_cast<std::size_t>(k)]));
        }
        if (model.conditioning == Conditioning::add) {
            Var a = lagged.front();
            for (std::size_t k = 1; k < lagged.size(); ++k) a = ag::add(a, lagged[k]);
            x = ag::add_row(x, as_row(a));
        } else {
            x = ag::add(x, layer.action_attn(ag::layer_norm(x, eps), ag::concat_rows(lagged)));
        }

        xn = ag::layer_norm(x, eps);
        x = ag::add(x, layer.ffn2(ag::silu(layer.ffn1(xn))));
    }
    return p.out(ag::layer_norm(x, eps));
}

BEVState compose_state(const Var& delta, const BEVState& prev)
{
    check(delta.shape() == prev.features.shape(), ErrorCode::shape_mismatch, "compose_state: shape mismatch");
    BEVState out;
    out.features = ag::add(delta, prev.features);
    out.timestamp = prev.timestamp + 1;
    out.pose = prev.pose;
    out.aligned = false;
    return out;
}

AlignResult align_features(const BEVState& state, const EgoMotion& motion, const AlignParams& p,
                           const WorldConfig& world)
{
    check(state.features.value().all_finite(), ErrorCode::non_finite, "align_features: non-finite state");
    AlignResult r;
    r.occ_logits = p.occ_head(state.features);
    r.occ_probs = ag::softmax_rows(r.occ_logits);
    const Var m = ag::constant(motion_features(motion, world));
    const Var ln = ag::layer_norm(state.features, p.eps);
    const Var gamma_m = as_row(p.gamma_motion(m));
    const Var beta_m = as_row(p.beta_motion(m));
    Var f = ag::add(ag::mul(p.gamma_occ(r.occ_probs), ln), ag::mul_row(ln, gamma_m));
    f = ag::add_row(ag::add(f, p.beta_occ(r.occ_probs)), beta_m);
    check(f.value().all_finite(), ErrorCode::non_finite, "align_features: non-finite modulation output");
    r.aligned = state;
    r.aligned.features = f;
    r.aligned.aligned = true;
    return r;
}

StepResult predict_step(const StreamMemory& memory, const EgoTrajectory& traj, const Dynamics& dyn)
{
    const BEVState& prev = memory.latest();
    const int target = prev.timestamp + 1;
    check(traj.has_frame(target), ErrorCode::out_of_range,
          "rollout: trajectory does not cover frame " + std::to_string(target));
    std::vector<Var> actions;
    for (const auto& s : memory.slots()) actions.push_back(embed_action(traj, s.timestamp, dyn.encoder, dyn.world));
    actions.push_back(embed_action(traj, target, dyn.encoder, dyn.world));
    const Var out = predict_residual(memory, actions, dyn.predictor, dyn.model, dyn.world);

    BEVState next;
    if (dyn.model.mode == PredictMode::residual) {
        next = compose_state(out, prev);
    } else {
        check(out.shape() == prev.features.shape(), ErrorCode::shape_mismatch, "rollout: shape mismatch");
        next.features = out;
        next.timestamp = target;
    }
    next.pose = pose_at(traj, target);

    StepResult r;
    if (dyn.model.feature_alignment) {
        AlignResult a = align_features(next, delta_or_zero(traj, target), dyn.align, dyn.world);
        r.state = a.aligned;
        r.align_logits = a.occ_logits;
    } else {
        r.state = next;
        r.state.aligned = true;
    }
    return r;
}

StepResult rollout_step(StreamMemory& memory, const EgoTrajectory& traj, const Dynamics& dyn)
{
    StepResult r = predict_step(memory, traj, dyn);
    memory.push(r.state);
    return r;
}

std::vector<StepResult> rollout(StreamMemory& memory, const EgoTrajectory& traj, int steps, const Dynamics& dyn,
                                bool advance_memory)
{
    check(steps >= 1, ErrorCode::invalid_argument, "rollout: steps must be >= 1");
    StreamMemory scratch = memory;
    StreamMemory& mem = advance_memory ? memory : scratch;
    std::vector<StepResult> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) out.push_back(rollout_step(mem, traj, dyn));
    return out;
}

}  // namespace rw
