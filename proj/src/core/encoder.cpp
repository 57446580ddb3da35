#include "encoder.hpp"

#include "error.hpp"

namespace rw {

EncoderParams::EncoderParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng)
    : conv1(ps, "encoder.conv1", observation_channels(world), model.dim / 2, 3, rng),
      conv2(ps, "encoder.conv2", model.dim / 2, model.dim, 3, rng),
      out(ps, "encoder.out", model.dim, model.dim, 1, rng, model.zero_init_outputs ? Init::zeros : Init::normal),
      action(ps, "encoder.action", 3, model.dim, model.dim, rng)
{
}

Tensor motion_features(const EgoMotion& m, const WorldConfig& cfg)
{
    return Tensor({1, 3}, std::vector<double>{m.translation.x / cfg.cell_size, m.translation.y / cfg.cell_size, m.yaw});
}

EgoMotion delta_or_zero(const EgoTrajectory& traj, int t)
{
    if (!traj.has_frame(t - 1)) return {};
    return ego_delta(traj, t);
}

Var embed_action(const EgoTrajectory& traj, int t, const EncoderParams& p, const WorldConfig& cfg)
{
    check(traj.has_frame(t), ErrorCode::out_of_range, "embed_action: frame outside trajectory");
    return p.action(ag::constant(motion_features(delta_or_zero(traj, t), cfg)));
}

std::vector<Var> embed_actions(const EgoTrajectory& traj, int from, int to, const EncoderParams& p,
                               const WorldConfig& cfg)
{
    check(to - from >= 1, ErrorCode::invalid_argument, "embed_actions: window shorter than 2 frames");
    check(traj.has_frame(from) && traj.has_frame(to), ErrorCode::out_of_range,
          "embed_actions: window outside trajectory");
    std::vector<Var> out;
    for (int t = from + 1; t <= to; ++t) out.push_back(embed_action(traj, t, p, cfg));
    return out;
}

BEVState encode_frame(const Observation& obs, const EgoTrajectory& ego, const EncoderParams& p,
                      const WorldConfig& cfg)
{
    const int channels = observation_channels(cfg);
    check(obs.values.rank() == 2 && obs.values.dim(0) == cfg.cells() && obs.values.dim(1) == channels,
          ErrorCode::shape_mismatch, "encode_scene: observation shape does not match the world config");
    const int t = obs.timestamp;
    const Pose pose = pose_at(ego, t);
    const Var x = warp_features(ag::constant(obs.values), cfg, relative_motion(pose, pose_at(ego, 0)));
    Var h = ag::silu(p.conv1(x, cfg.bev_h, cfg.bev_w));
    h = ag::silu(p.conv2(h, cfg.bev_h, cfg.bev_w));
    const Var e = embed_action(ego, t, p, cfg);
    h = ag::add_row(h, ag::reshape(e, {e.value().cols()}));
    BEVState s;
    s.features = p.out(h, cfg.bev_h, cfg.bev_w);
    s.timestamp = t;
    s.pose = pose;
    s.aligned = true;
    return s;
}

std::vector<BEVState> encode_scene(const std::vector<Observation>& obs, const EgoTrajectory& ego,
                                   const EncoderParams& p, const WorldConfig& cfg)
{
    check(static_cast<int>(obs.size()) == cfg.h_past + 1, ErrorCode::shape_mismatch,
          "encode_scene: expected h_past + 1 observations");
    std::vector<BEVState> out;
    out.reserve(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k) {
        check(obs[k].timestamp == static_cast<int>(k) - cfg.h_past, ErrorCode::invalid_argument,
              "encode_scene: observations must cover frames -h_past .. 0 in order");
        out.push_back(encode_frame(obs[k], ego, p, cfg));
    }
    return out;
}

}  // namespace rw
