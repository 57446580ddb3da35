#include "gridworld.hpp"

#include "error.hpp"
#include "geometry.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rw {

const char* class_name(int cls)
{
    switch (cls) {
    case kFree: return "free";
    case kRoad: return "road";
    case kStaticObstacle: return "static_obstacle";
    case kVehicle: return "vehicle";
    case kPedestrian: return "pedestrian";
    case kBarrier: return "barrier";
    default: return "unknown";
    }
}

const char* command_name(Command c)
{
    switch (c) {
    case Command::left: return "LEFT";
    case Command::straight: return "STRAIGHT";
    case Command::right: return "RIGHT";
    }
    return "?";
}

WorldConfig WorldConfig::full_scale()
{
    WorldConfig c;
    c.bev_h = 512;
    c.bev_w = 512;
    c.z_bins = 40;
    c.cell_size = 0.2;
    return c;
}

void WorldConfig::validate() const
{
    check(bev_h >= 1 && bev_w >= 1 && z_bins >= 1, ErrorCode::config, "world: grid dimensions must be >= 1");
    check(num_classes >= 1 && num_classes <= 255, ErrorCode::config, "world: num_classes must be in [1, 255]");
    check(cell_size > 0 && std::isfinite(cell_size), ErrorCode::config, "world: cell_size must be positive");
    check(h_past >= 0, ErrorCode::config, "world: h_past must be >= 0");
    check(f_future >= 1, ErrorCode::config, "world: f_future must be >= 1");
    check(dt > 0 && std::isfinite(dt), ErrorCode::config, "world: dt must be positive");
}

void GeneratorParams::validate() const
{
    check(min_vehicles >= 0 && max_vehicles >= min_vehicles, ErrorCode::config, "generator: bad vehicle count range");
    check(min_pedestrians >= 0 && max_pedestrians >= min_pedestrians, ErrorCode::config,
          "generator: bad pedestrian count range");
    check(max_agent_speed >= 0, ErrorCode::config, "generator: max_agent_speed must be >= 0");
    check(vehicle_max_speed >= 0 && vehicle_max_speed <= max_agent_speed, ErrorCode::config,
          "generator: vehicle_max_speed must be in [0, max_agent_speed]");
    check(pedestrian_max_speed >= 0 && pedestrian_max_speed <= max_agent_speed, ErrorCode::config,
          "generator: pedestrian_max_speed must be in [0, max_agent_speed]");
    check(static_density >= 0 && static_density < 1, ErrorCode::config, "generator: static_density in [0,1)");
    check(ego_speed_min >= 0 && ego_speed_max >= ego_speed_min, ErrorCode::config, "generator: bad ego speed range");
    check(ego_yaw_rate_min >= 0 && ego_yaw_rate_max >= ego_yaw_rate_min, ErrorCode::config,
          "generator: bad yaw rate range");
    check(noise.scale >= 0 && noise.mask_fraction >= 0 && noise.mask_fraction <= 1, ErrorCode::config,
          "generator: bad noise parameters");
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

Vec2 rotate(Vec2 v, double yaw)
{
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double wrap_angle(double a)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

SemanticOccGrid::SemanticOccGrid(int h, int w, int z, int t)
    : bev_h(h), bev_w(w), z_bins(z), timestamp(t), labels(static_cast<std::size_t>(h) * w * z, kFree)
{
}

int SemanticOccGrid::top_class(int i, int j) const
{
    for (int z = z_bins - 1; z >= 0; --z) {
        const int c = at(i, j, z);
        if (c != kFree) return c;
    }
    return kFree;
}

std::vector<int> SemanticOccGrid::top_surface() const
{
    std::vector<int> out(static_cast<std::size_t>(bev_h) * bev_w);
    for (int i = 0; i < bev_h; ++i)
        for (int j = 0; j < bev_w; ++j) out[static_cast<std::size_t>(i) * bev_w + j] = top_class(i, j);
    return out;
}

std::vector<int> SemanticOccGrid::labels_as_int() const { return {labels.begin(), labels.end()}; }

void SemanticOccGrid::validate(const WorldConfig& cfg) const
{
    check(bev_h == cfg.bev_h && bev_w == cfg.bev_w && z_bins == cfg.z_bins, ErrorCode::shape_mismatch,
          "occupancy grid shape does not match world config");
    check(labels.size() == static_cast<std::size_t>(cfg.voxels()), ErrorCode::shape_mismatch,
          "occupancy label count does not match shape");
    for (auto v : labels)
        check(v < cfg.num_classes, ErrorCode::out_of_range, "occupancy label outside [0, num_classes)");
}

Vec2 EgoTrajectory::at(int t) const
{
    check(has_frame(t), ErrorCode::out_of_range, "trajectory has no frame " + std::to_string(t));
    return positions[static_cast<std::size_t>(t - first_frame)];
}

const SemanticOccGrid& SceneEpisode::occ_at(int t) const
{
    check(t >= -config.h_past && t <= config.f_future, ErrorCode::out_of_range, "occupancy frame out of range");
    return occ[static_cast<std::size_t>(t + config.h_past)];
}

const Observation& SceneEpisode::observation_at(int t) const
{
    check(t >= -config.h_past && t <= 0, ErrorCode::out_of_range, "observation frame out of range");
    return observations[static_cast<std::size_t>(t + config.h_past)];
}

Command SceneEpisode::command_at(int t) const
{
    check(t >= 1 && t <= config.f_future, ErrorCode::out_of_range, "command frame out of range");
    return commands[static_cast<std::size_t>(t - 1)];
}

namespace {
constexpr double kHeadingEps = 1e-9;
}

double heading_at(const EgoTrajectory& traj, int t)
{
    check(traj.has_frame(t), ErrorCode::out_of_range, "heading_at: frame outside trajectory");
    for (int k = t; k > traj.first_frame; --k) {
        const Vec2 d = traj.at(k) - traj.at(k - 1);
        if (norm(d) >= kHeadingEps) return std::atan2(d.y, d.x);
    }
    for (int k = t; k < traj.last_frame(); ++k) {
        const Vec2 d = traj.at(k + 1) - traj.at(k);
        if (norm(d) >= kHeadingEps) return std::atan2(d.y, d.x);
    }
    return 0.0;
}

Pose pose_at(const EgoTrajectory& traj, int t) { return {traj.at(t), heading_at(traj, t)}; }

EgoMotion ego_delta(const EgoTrajectory& traj, int t)
{
    check(traj.has_frame(t) && traj.has_frame(t - 1), ErrorCode::out_of_range,
          "ego_delta: frames t-1 and t must exist");
    EgoMotion m;
    m.translation = traj.at(t) - traj.at(t - 1);
    if (traj.has_frame(t - 2)) {
        const Vec2 prev = traj.at(t - 1) - traj.at(t - 2);
        if (norm(prev) >= kHeadingEps && norm(m.translation) >= kHeadingEps)
            m.yaw = wrap_angle(std::atan2(m.translation.y, m.translation.x) - std::atan2(prev.y, prev.x));
    }
    return m;
}

EgoMotion relative_motion(const Pose& from, const Pose& to)
{
    return {rotate(to.position - from.position, -from.yaw), wrap_angle(to.yaw - from.yaw)};
}

int observation_channels(const WorldConfig& cfg) { return cfg.num_classes + 1; }

Command command_from_heading_change(double radians)
{
    constexpr double threshold = 15.0 * std::numbers::pi / 180.0;
    if (radians > threshold) return Command::left;
    if (radians < -threshold) return Command::right;
    return Command::straight;
}

Vec2 cell_center(const WorldConfig& cfg, int i, int j)
{
    return {(j + 0.5 - cfg.bev_w / 2.0) * cfg.cell_size, (i + 0.5 - cfg.bev_h / 2.0) * cfg.cell_size};
}

std::array<int, 2> cell_of(const WorldConfig& cfg, Vec2 p)
{
    const int j = static_cast<int>(std::floor(p.x / cfg.cell_size + cfg.bev_w / 2.0));
    const int i = static_cast<int>(std::floor(p.y / cfg.cell_size + cfg.bev_h / 2.0));
    if (i < 0 || i >= cfg.bev_h || j < 0 || j >= cfg.bev_w) return {-1, -1};
    return {i, j};
}

std::array<double, 2> continuous_cell(const WorldConfig& cfg, Vec2 p)
{
    return {p.y / cfg.cell_size + cfg.bev_h / 2.0 - 0.5, p.x / cfg.cell_size + cfg.bev_w / 2.0 - 0.5};
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct Box {
    int row = 0;  // top-left cell
    int col = 0;
    int rows = 1;
    int cols = 1;
};

struct Agent {
    int cls = kVehicle;
    std::vector<Box> track;  // one box per frame
};

struct Layout {
    int road_half = 4;
    int center_row = 0;
    bool intersection = false;
    int cross_col = 0;  // first column right of the vertical road's centre line
    std::vector<int> ground;    // per column: kFree or kRoad
    std::vector<int> obstacle;  // per column: kFree, kStaticObstacle or kBarrier
};

int scaled_cells(double metres, double cell_size, int minimum)
{
    return std::max(minimum, static_cast<int>(std::lround(metres / cell_size)));
}

struct ZRange {
    int lo;
    int hi;
};

ZRange z_range(int cls, int z_bins)
{
    if (z_bins == 1) return {0, 0};
    switch (cls) {
    case kRoad: return {0, 0};
    case kStaticObstacle: return {0, z_bins - 1};
    case kBarrier: return {0, std::max(0, z_bins / 4)};
    case kVehicle: return {1, std::max(1, z_bins / 2)};
    case kPedestrian: return {1, std::max(1, (3 * z_bins) / 4)};
    default: return {0, 0};
    }
}

bool box_inside(const Box& b, const WorldConfig& cfg)
{
    return b.row >= 0 && b.col >= 0 && b.row + b.rows <= cfg.bev_h && b.col + b.cols <= cfg.bev_w;
}

bool box_hits(const Box& b, const std::vector<int>& mask, int width, int value)
{
    for (int i = b.row; i < b.row + b.rows; ++i)
        for (int j = b.col; j < b.col + b.cols; ++j)
            if (mask[static_cast<std::size_t>(i) * width + j] == value) return true;
    return false;
}

bool is_road_cell(const Layout& lay, int width, int i, int j)
{
    return lay.ground[static_cast<std::size_t>(i) * width + j] == kRoad;
}

Layout build_layout(const WorldConfig& cfg, const GeneratorParams& gen, Rng& rng, const Box& ego_zone, int veh_wid)
{
    Layout lay;
    const int w = cfg.bev_w;
    lay.road_half = scaled_cells(4.0, cfg.cell_size, 2);
    lay.center_row = cfg.bev_h / 2;
    lay.ground.assign(static_cast<std::size_t>(cfg.cells()), kFree);
    lay.obstacle.assign(static_cast<std::size_t>(cfg.cells()), kFree);
    for (int i = lay.center_row - lay.road_half; i < lay.center_row + lay.road_half; ++i)
        for (int j = 0; j < w; ++j) lay.ground[static_cast<std::size_t>(i) * w + j] = kRoad;

    lay.intersection = rng.bernoulli(gen.intersection_prob);
    if (lay.intersection) {
        const int lo = w / 2 + lay.road_half;
        const int hi = w - lay.road_half - 1;
        lay.cross_col = rng.uniform_int(std::min(lo, hi), hi);
        const int half = std::max(veh_wid, lay.road_half / 2);
        for (int i = 0; i < cfg.bev_h; ++i)
            for (int j = lay.cross_col - half; j < lay.cross_col + half; ++j)
                if (j >= 0 && j < w) lay.ground[static_cast<std::size_t>(i) * w + j] = kRoad;
    }

    // Buildings off the road.
    const int target = static_cast<int>(gen.static_density * cfg.cells());
    int filled = 0;
    const int min_side = scaled_cells(2.0, cfg.cell_size, 1);
    const int max_side = scaled_cells(5.0, cfg.cell_size, 1);
    for (int attempt = 0; attempt < 200 && filled < target; ++attempt) {
        Box b{0, 0, rng.uniform_int(min_side, max_side), rng.uniform_int(min_side, max_side)};
        b.row = rng.uniform_int(0, std::max(0, cfg.bev_h - b.rows));
        b.col = rng.uniform_int(0, std::max(0, w - b.cols));
        if (!box_inside(b, cfg) || box_hits(b, lay.ground, w, kRoad)) continue;
        const bool near_ego = !(b.row + b.rows <= ego_zone.row || ego_zone.row + ego_zone.rows <= b.row ||
                                b.col + b.cols <= ego_zone.col || ego_zone.col + ego_zone.cols <= b.col);
        if (near_ego) continue;
        for (int i = b.row; i < b.row + b.rows; ++i)
            for (int j = b.col; j < b.col + b.cols; ++j) {
                auto& cell = lay.obstacle[static_cast<std::size_t>(i) * w + j];
                if (cell == kFree) ++filled;
                cell = kStaticObstacle;
            }
    }

    // Low barriers along the road edges.
    if (cfg.num_classes > kBarrier) {
        const int edges[2] = {lay.center_row - lay.road_half - 1, lay.center_row + lay.road_half};
        for (int edge : edges) {
            if (edge < 0 || edge >= cfg.bev_h) continue;
            const int segments = rng.uniform_int(1, 3);
            for (int s = 0; s < segments; ++s) {
                const int len = rng.uniform_int(scaled_cells(3.0, cfg.cell_size, 1), scaled_cells(6.0, cfg.cell_size, 1));
                const int start = rng.uniform_int(0, std::max(0, w - len));
                for (int j = start; j < start + len && j < w; ++j)
                    if (!is_road_cell(lay, w, edge, j)) lay.obstacle[static_cast<std::size_t>(edge) * w + j] = kBarrier;
            }
        }
    }
    return lay;
}

// Advances a box along a piecewise-constant velocity, reversing a velocity
// component whenever the next box would leave the grid or hit `blocked`.
std::vector<Box> simulate(Box start, int vr, int vc, int frames, int switch_frame, int new_speed, const WorldConfig& cfg,
                          const std::vector<int>* blocked)
{
    std::vector<Box> track{start};
    auto ok = [&](const Box& b) {
        return box_inside(b, cfg) && (blocked == nullptr || !box_hits(b, *blocked, cfg.bev_w, kStaticObstacle));
    };
    for (int k = 1; k < frames; ++k) {
        if (k == switch_frame) {
            vr = vr == 0 ? 0 : (vr > 0 ? new_speed : -new_speed);
            vc = vc == 0 ? 0 : (vc > 0 ? new_speed : -new_speed);
        }
        Box cur = track.back();
        Box next{cur.row + vr, cur.col + vc, cur.rows, cur.cols};
        if (!ok(next)) {
            Box flip_r{cur.row - vr, cur.col + vc, cur.rows, cur.cols};
            Box flip_c{cur.row + vr, cur.col - vc, cur.rows, cur.cols};
            Box flip_both{cur.row - vr, cur.col - vc, cur.rows, cur.cols};
            if (vr != 0 && ok(flip_r)) {
                vr = -vr;
                next = flip_r;
            } else if (vc != 0 && ok(flip_c)) {
                vc = -vc;
                next = flip_c;
            } else if (ok(flip_both)) {
                vr = -vr;
                vc = -vc;
                next = flip_both;
            } else {
                vr = vc = 0;
                next = cur;
            }
        }
        track.push_back(next);
    }
    return track;
}

bool overlaps(const Box& a, const Box& b)
{
    return !(a.row + a.rows <= b.row || b.row + b.rows <= a.row || a.col + a.cols <= b.col || b.col + b.cols <= a.col);
}

}  // namespace

SceneEpisode generate_episode(std::uint64_t seed, const WorldConfig& cfg, const GeneratorParams& gen)
{
    cfg.validate();
    gen.validate();
    check(cfg.num_classes > kVehicle, ErrorCode::config, "generator: needs at least the vehicle class");

    const int veh_len = scaled_cells(4.0, cfg.cell_size, 2);
    const int veh_wid = scaled_cells(2.0, cfg.cell_size, 1);
    const int road_half = scaled_cells(4.0, cfg.cell_size, 2);
    check(cfg.bev_w >= 2 * veh_len + 2 && cfg.bev_h >= 2 * road_half + 2 * veh_len, ErrorCode::config,
          "generator: agent footprints cannot fit the grid");
    check(cfg.bev_w >= 2 * road_half + 2 * veh_len, ErrorCode::config,
          "generator: grid too narrow for the road layout");

    Rng rng = Rng::substream(seed, "episode");
    const int frames = cfg.frame_count();
    const int h = cfg.h_past;
    const int w = cfg.bev_w;

    // Cells around the ego at t = 0 stay clear of spawns.
    const Box ego_zone{cfg.bev_h / 2 - veh_wid, cfg.bev_w / 2 - veh_len, 2 * veh_wid, 2 * veh_len};
    Layout lay = build_layout(cfg, gen, rng, ego_zone, veh_wid);

    std::vector<Agent> agents;
    const int cr = lay.center_row;
    const int n_veh = rng.uniform_int(gen.min_vehicles, gen.max_vehicles);
    for (int v = 0; v < n_veh; ++v) {
        // Lanes: 0 = ego lane ahead, 1 = same direction beside, 2 = oncoming, 3/4 = crossing road.
        const int lanes = lay.intersection ? 5 : 3;
        const int lane = rng.uniform_int(0, lanes - 1);
        Box b;
        int vr = 0, vc = 0;
        int speed = rng.uniform_int(0, gen.vehicle_max_speed);
        if (lane <= 2) {
            b.rows = veh_wid;
            b.cols = veh_len;
            if (lane == 0) {
                b.row = cr - (veh_wid + 1) / 2;
                b.col = rng.uniform_int(w / 2 + veh_len / 2 + 3, std::max(w / 2 + veh_len / 2 + 3, w - veh_len));
                speed = std::min(speed, 1);
                vc = speed;
            } else if (lane == 1) {
                b.row = std::min(cr + road_half - veh_wid, cr + (veh_wid + 1) / 2 + 1);
                b.col = rng.uniform_int(0, w - veh_len);
                vc = speed;
            } else {
                b.row = std::max(cr - road_half, cr - (veh_wid + 1) / 2 - 1 - veh_wid);
                b.col = rng.uniform_int(0, w - veh_len);
                vc = -speed;
            }
        } else {
            b.rows = veh_len;
            b.cols = veh_wid;
            b.row = rng.uniform_int(0, cfg.bev_h - veh_len);
            if (lane == 3) {
                b.col = lay.cross_col - veh_wid;
                vr = speed;
            } else {
                b.col = lay.cross_col;
                vr = -speed;
            }
        }
        if (!box_inside(b, cfg) || overlaps(b, ego_zone)) continue;
        // Frame index 0 of the track is t = -h.
        const int switch_frame = rng.bernoulli(gen.velocity_change_prob) ? rng.uniform_int(1, frames - 1) : -1;
        const int new_speed = rng.uniform_int(0, gen.vehicle_max_speed);
        auto track = simulate(b, vr, vc, frames, switch_frame, new_speed, cfg, nullptr);
        if (overlaps(track[static_cast<std::size_t>(h)], ego_zone)) continue;
        agents.push_back({kVehicle, std::move(track)});
    }

    if (cfg.num_classes > kPedestrian) {
        const int n_ped = rng.uniform_int(gen.min_pedestrians, gen.max_pedestrians);
        const int ped = scaled_cells(1.0, cfg.cell_size, 1);
        for (int p = 0; p < n_ped; ++p) {
            Box b{rng.uniform_int(0, cfg.bev_h - ped), rng.uniform_int(0, w - ped), ped, ped};
            if (box_hits(b, lay.obstacle, w, kStaticObstacle) || overlaps(b, ego_zone)) continue;
            const int vr = rng.uniform_int(-gen.pedestrian_max_speed, gen.pedestrian_max_speed);
            const int vc = rng.uniform_int(-gen.pedestrian_max_speed, gen.pedestrian_max_speed);
            const int switch_frame = rng.bernoulli(gen.velocity_change_prob) ? rng.uniform_int(1, frames - 1) : -1;
            auto track = simulate(b, vr, vc, frames, switch_frame, rng.uniform_int(0, gen.pedestrian_max_speed), cfg,
                                  &lay.obstacle);
            if (overlaps(track[static_cast<std::size_t>(h)], ego_zone)) continue;
            agents.push_back({kPedestrian, std::move(track)});
        }
    }

    SceneEpisode ep;
    ep.config = cfg;
    ep.seed = seed;
    ep.noise = gen.noise;
    ep.occ.reserve(static_cast<std::size_t>(frames));
    for (int k = 0; k < frames; ++k) {
        SemanticOccGrid grid(cfg.bev_h, w, cfg.z_bins, k - h);
        for (int i = 0; i < cfg.bev_h; ++i)
            for (int j = 0; j < w; ++j) {
                const std::size_t c = static_cast<std::size_t>(i) * w + j;
                if (lay.ground[c] == kRoad) grid.set(i, j, 0, kRoad);
                if (lay.obstacle[c] != kFree) {
                    const ZRange zr = z_range(lay.obstacle[c], cfg.z_bins);
                    for (int z = zr.lo; z <= zr.hi; ++z) grid.set(i, j, z, lay.obstacle[c]);
                }
            }
        for (const Agent& a : agents) {
            const Box& b = a.track[static_cast<std::size_t>(k)];
            const ZRange zr = z_range(a.cls, cfg.z_bins);
            for (int i = b.row; i < b.row + b.rows; ++i)
                for (int j = b.col; j < b.col + b.cols; ++j)
                    for (int z = zr.lo; z <= zr.hi; ++z) grid.set(i, j, z, a.cls);
        }
        ep.occ.push_back(std::move(grid));
    }

    // Ego: straight along +x in the past, constant yaw rate in the future,
    // slowing down whenever the next footprint would touch a movable agent.
    const double speed = rng.uniform(gen.ego_speed_min, gen.ego_speed_max);
    double yaw_rate = 0.0;
    if (rng.bernoulli(gen.ego_turn_prob)) {
        yaw_rate = rng.uniform(gen.ego_yaw_rate_min, gen.ego_yaw_rate_max);
        if (rng.bernoulli(0.5)) yaw_rate = -yaw_rate;
    }
    ep.ego.first_frame = -h;
    for (int t = -h; t <= 0; ++t) ep.ego.positions.push_back({t * speed * cfg.dt, 0.0});
    double heading = 0.0;
    const Footprint fp = Footprint::ego(cfg);
    for (int t = 1; t <= cfg.f_future; ++t) {
        heading += yaw_rate * cfg.dt;
        const Vec2 prev = ep.ego.positions.back();
        const Vec2 dir{std::cos(heading), std::sin(heading)};
        Vec2 next = prev + (speed * cfg.dt) * dir;
        const auto& grid = ep.occ[static_cast<std::size_t>(t + h)];
        for (double factor : {0.5, 0.0}) {
            if (!footprint_touches(fp, grid, cfg, next, heading, {kVehicle, kPedestrian})) break;
            next = prev + (factor * speed * cfg.dt) * dir;
        }
        ep.ego.positions.push_back(next);
    }
    const Command cmd = command_from_heading_change(heading);
    ep.commands.assign(static_cast<std::size_t>(cfg.f_future), cmd);

    for (int t = -h; t <= 0; ++t) ep.observations.push_back(render_observation(ep, t, ep.noise));
    return ep;
}

namespace {

Observation render_frame(const SceneEpisode& ep, int t, const NoiseParams& noise)
{
    const WorldConfig& cfg = ep.config;
    const int channels = observation_channels(cfg);
    const int unobserved = cfg.num_classes;
    const SemanticOccGrid& grid = ep.occ_at(t);
    const Pose pose = pose_at(ep.ego, t);
    Rng rng = Rng::substream(ep.seed, "observation", static_cast<std::uint64_t>(t + cfg.h_past));

    Observation obs;
    obs.timestamp = t;
    obs.values = ag::Tensor({cfg.cells(), channels}, 0.0);
    for (int i = 0; i < cfg.bev_h; ++i)
        for (int j = 0; j < cfg.bev_w; ++j) {
            const std::size_t row = static_cast<std::size_t>(i) * cfg.bev_w + j;
            double* dst = obs.values.data() + row * channels;
            const Vec2 world = pose.position + rotate(cell_center(cfg, i, j), pose.yaw);
            const auto src = cell_of(cfg, world);
            const bool masked = rng.uniform() < noise.mask_fraction;
            if (src[0] < 0 || masked) {
                dst[unobserved] = 1.0;
                continue;
            }
            dst[grid.top_class(src[0], src[1])] = 1.0;
            if (noise.scale > 0)
                for (int c = 0; c < channels; ++c) dst[c] += noise.scale * rng.normal();
        }
    return obs;
}

}  // namespace

Observation render_observation(const SceneEpisode& episode, int t, const NoiseParams& noise)
{
    check(t >= -episode.config.h_past && t <= 0, ErrorCode::out_of_range,
          "render_observation: frame " + std::to_string(t) + " outside [-h_past, 0]");
    return render_frame(episode, t, noise);
}

Observation render_privileged(const SceneEpisode& episode, int t, const NoiseParams& noise)
{
    return render_frame(episode, t, noise);
}

}  // namespace rw
