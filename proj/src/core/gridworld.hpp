#pragma once

// Synthetic driving world: domain types, procedural episode generation and
// noisy top-down observations.
//
// Frame indices run from -h_past to f_future; frame 0 is the current frame.
// Occupancy grids are stored in the ego frame of t = 0, a fixed world window
// centred on the ego with +x along the ego heading. Column j maps to x and
// row i maps to y.

#include "autograd.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rw {

enum SemanticClass : int {
    kFree = 0,
    kRoad = 1,
    kStaticObstacle = 2,
    kVehicle = 3,
    kPedestrian = 4,
    kBarrier = 5,
};

const char* class_name(int cls);

struct WorldConfig {
    int bev_h = 32;
    int bev_w = 32;
    int z_bins = 4;
    double cell_size = 1.0;
    int num_classes = 5;
    int h_past = 2;
    int f_future = 4;
    double dt = 0.5;

    // Full-resolution benchmark grid: 512 x 512 x 40 voxels of 0.2 m.
    static WorldConfig full_scale();

    void validate() const;
    int frame_count() const { return h_past + f_future + 1; }
    int cells() const { return bev_h * bev_w; }
    int voxels() const { return bev_h * bev_w * z_bins; }
    bool operator==(const WorldConfig&) const = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 v);
Vec2 rotate(Vec2 v, double yaw);
// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct SemanticOccGrid {
    int bev_h = 0;
    int bev_w = 0;
    int z_bins = 0;
    int timestamp = 0;
    std::vector<std::uint8_t> labels;  // row-major (i, j, z)

    SemanticOccGrid() = default;
    SemanticOccGrid(int h, int w, int z, int t);

    std::size_t index(int i, int j, int z) const
    {
        return (static_cast<std::size_t>(i) * bev_w + j) * z_bins + z;
    }
    std::uint8_t at(int i, int j, int z) const { return labels[index(i, j, z)]; }
    void set(int i, int j, int z, int cls) { labels[index(i, j, z)] = static_cast<std::uint8_t>(cls); }

    // Highest non-free label of a column, or free.
    int top_class(int i, int j) const;
    std::vector<int> top_surface() const;
    std::vector<int> labels_as_int() const;
    void validate(const WorldConfig& cfg) const;
    bool operator==(const SemanticOccGrid&) const = default;
};

struct EgoTrajectory {
    int first_frame = 0;
    std::vector<Vec2> positions;

    int last_frame() const { return first_frame + static_cast<int>(positions.size()) - 1; }
    bool has_frame(int t) const { return t >= first_frame && t <= last_frame(); }
    Vec2 at(int t) const;
    bool operator==(const EgoTrajectory&) const = default;
};

struct EgoMotion {
    Vec2 translation;
    double yaw = 0.0;
    bool operator==(const EgoMotion&) const = default;
};

struct Pose {
    Vec2 position;
    double yaw = 0.0;
};

enum class Command : int { left = 0, straight = 1, right = 2 };
constexpr int kCommandCount = 3;
const char* command_name(Command c);

struct NoiseParams {
    double scale = 0.1;
    double mask_fraction = 0.1;
    bool operator==(const NoiseParams&) const = default;
};

struct GeneratorParams {
    int min_vehicles = 2;
    int max_vehicles = 5;
    int min_pedestrians = 0;
    int max_pedestrians = 3;
    int max_agent_speed = 2;  // cells per frame, Chebyshev
    int vehicle_max_speed = 2;
    int pedestrian_max_speed = 1;
    double velocity_change_prob = 0.15;
    double static_density = 0.06;
    double intersection_prob = 0.5;
    double ego_speed_min = 2.0;  // m/s
    double ego_speed_max = 4.0;
    double ego_turn_prob = 0.5;
    double ego_yaw_rate_min = 0.25;  // rad/s
    double ego_yaw_rate_max = 0.45;
    NoiseParams noise;

    void validate() const;
    bool operator==(const GeneratorParams&) const = default;
};

// Observation: [bev_h * bev_w, num_classes + 1]. Observed columns carry a
// noisy one-hot of the top-surface class and 0 in the last channel; unobserved
// columns are all zero except a 1 in the last channel.
struct Observation {
    int timestamp = 0;
    ag::Tensor values;
    bool operator==(const Observation&) const = default;
};

struct SceneEpisode {
    WorldConfig config;
    std::uint64_t seed = 0;
    NoiseParams noise;
    std::vector<SemanticOccGrid> occ;       // frames -h_past .. f_future
    EgoTrajectory ego;                      // same span
    std::vector<Command> commands;          // frames 1 .. f_future
    std::vector<Observation> observations;  // frames -h_past .. 0

    const SemanticOccGrid& occ_at(int t) const;
    const Observation& observation_at(int t) const;
    Command command_at(int t) const;
    bool operator==(const SceneEpisode&) const = default;
};

// Heading (radians) of the latest non-degenerate displacement ending at or
// before frame t; falls back to the first forward displacement, then 0.
double heading_at(const EgoTrajectory& traj, int t);
Pose pose_at(const EgoTrajectory& traj, int t);

// Motion from frame t-1 to t. yaw is the turn between consecutive
// displacement directions (0 if either is shorter than eps or t-1 is the
// first frame).
EgoMotion ego_delta(const EgoTrajectory& traj, int t);

// Rigid motion taking the ego frame at `from` to the ego frame at `to`,
// expressed in the `from` frame.
EgoMotion relative_motion(const Pose& from, const Pose& to);

SceneEpisode generate_episode(std::uint64_t seed, const WorldConfig& cfg, const GeneratorParams& gen);

// t must lie in [-h_past, 0].
Observation render_observation(const SceneEpisode& episode, int t, const NoiseParams& noise);
// Training-only rendering of any frame, including future ones.
Observation render_privileged(const SceneEpisode& episode, int t, const NoiseParams& noise);

int observation_channels(const WorldConfig& cfg);
Command command_from_heading_change(double radians);

// Cell centre of (i, j) in metres and the inverse lookup (-1 when outside).
Vec2 cell_center(const WorldConfig& cfg, int i, int j);
std::array<int, 2> cell_of(const WorldConfig& cfg, Vec2 p);
// Continuous (row, col) coordinates of a metric point.
std::array<double, 2> continuous_cell(const WorldConfig& cfg, Vec2 p);

}  // namespace rw
