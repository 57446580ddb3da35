#pragma once

// Hand-sized worlds, trajectories and grids for unit tests.

#include "gridworld.hpp"
#include "model_config.hpp"
#include "rng.hpp"

namespace rw::testing {

inline WorldConfig tiny_world()
{
    WorldConfig w;
    w.bev_h = 4;
    w.bev_w = 4;
    w.z_bins = 2;
    w.h_past = 1;
    w.f_future = 2;
    return w;
}

inline ModelConfig tiny_model()
{
    ModelConfig m;
    m.dim = 8;
    m.layers = 1;
    m.heads = 2;
    m.points = 2;
    m.memory = 2;
    return m;
}

// Gentle left curve covering frames -h_past .. f_future.
inline EgoTrajectory curved_ego(const WorldConfig& w, double speed = 0.8, double turn = 0.15)
{
    EgoTrajectory e;
    e.first_frame = -w.h_past;
    std::vector<Vec2> pts;
    // Integrate backwards and forwards from the origin at frame 0.
    Vec2 back{0.0, 0.0};
    double hb = 0.0;
    for (int t = 0; t > -w.h_past; --t) {
        hb -= turn;
        back = back - rotate({speed, 0.0}, hb);
        pts.insert(pts.begin(), back);
    }
    pts.push_back({0.0, 0.0});
    Vec2 fwd{0.0, 0.0};
    double hf = 0.0;
    for (int t = 1; t <= w.f_future; ++t) {
        hf += turn;
        fwd = fwd + rotate({speed, 0.0}, hf);
        pts.push_back(fwd);
    }
    e.positions = pts;
    return e;
}

inline Observation random_observation(const WorldConfig& w, int t, std::uint64_t seed)
{
    Rng rng(seed);
    Observation o;
    o.timestamp = t;
    o.values = ag::Tensor({w.cells(), w.num_classes + 1});
    for (auto& v : o.values.values()) v = rng.uniform();
    return o;
}

inline SemanticOccGrid random_grid(const WorldConfig& w, int t, std::uint64_t seed)
{
    Rng rng(seed);
    SemanticOccGrid g(w.bev_h, w.bev_w, w.z_bins, t);
    for (auto& v : g.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, w.num_classes - 1));
    return g;
}

}  // namespace rw::testing
