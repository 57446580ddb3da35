#include "bev.hpp"

#include "error.hpp"

#include <cmath>

namespace rw {

Var warp_features(const Var& features, const WorldConfig& cfg, const EgoMotion& motion)
{
    check(std::isfinite(motion.translation.x) && std::isfinite(motion.translation.y) && std::isfinite(motion.yaw),
          ErrorCode::non_finite, "warp_bev: non-finite motion");
    check(std::abs(motion.translation.x) <= cfg.bev_w * cfg.cell_size / 2.0 &&
              std::abs(motion.translation.y) <= cfg.bev_h * cfg.cell_size / 2.0,
          ErrorCode::invalid_argument, "warp_bev: translation exceeds half the grid extent");
    check(features.value().rows() == cfg.cells(), ErrorCode::shape_mismatch, "warp_bev: feature map size mismatch");
    if (motion.translation == Vec2{} && motion.yaw == 0.0) return features;

    Tensor pos({cfg.cells(), 2});
    for (int i = 0; i < cfg.bev_h; ++i)
        for (int j = 0; j < cfg.bev_w; ++j) {
            const Vec2 src = rotate(cell_center(cfg, i, j), motion.yaw) + motion.translation;
            const auto rc = continuous_cell(cfg, src);
            const std::size_t q = static_cast<std::size_t>(i) * cfg.bev_w + j;
            pos[2 * q] = rc[0];
            pos[2 * q + 1] = rc[1];
        }
    return ag::bilinear_sample(features, cfg.bev_h, cfg.bev_w, pos);
}

BEVState warp_bev(const BEVState& state, const WorldConfig& cfg, const EgoMotion& motion)
{
    BEVState out = state;
    out.features = warp_features(state.features, cfg, motion);
    return out;
}

}  // namespace rw
