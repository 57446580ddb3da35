#include "episode_io.hpp"
#include "error.hpp"
#include "gridworld.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace rw;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("resworld_test_" + name);
    fs::remove_all(p);
    return p;
}

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ok;
}

}  // namespace

TEST_CASE("generation is deterministic per seed and differs across seeds")
{
    const WorldConfig w;
    const GeneratorParams g;
    const SceneEpisode a = generate_episode(7, w, g);
    const SceneEpisode b = generate_episode(7, w, g);
    const SceneEpisode c = generate_episode(8, w, g);
    CHECK(a == b);
    CHECK(episode_hash(a) == episode_hash(b));
    bool differs = false;
    for (std::size_t t = 0; t < a.occ.size(); ++t) differs = differs || a.occ[t].labels != c.occ[t].labels;
    CHECK(differs);
}

TEST_CASE("episodes carry valid labels and the declared frame span")
{
    const WorldConfig w;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SceneEpisode e = generate_episode(seed, w, GeneratorParams{});
        REQUIRE(static_cast<int>(e.occ.size()) == w.frame_count());
        CHECK(e.ego.first_frame == -w.h_past);
        CHECK(e.ego.last_frame() == w.f_future);
        CHECK(static_cast<int>(e.commands.size()) == w.f_future);
        CHECK(static_cast<int>(e.observations.size()) == w.h_past + 1);
        for (const auto& g : e.occ)
            for (auto v : g.labels) CHECK(v < w.num_classes);
    }
}

TEST_CASE("dynamic agents move at most max_agent_speed cells per frame")
{
    const WorldConfig w;
    const GeneratorParams g;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SceneEpisode e = generate_episode(seed, w, g);
        for (int t = -w.h_past; t < w.f_future; ++t) {
            const auto& now = e.occ_at(t);
            const auto& next = e.occ_at(t + 1);
            for (int i = 0; i < w.bev_h; ++i)
                for (int j = 0; j < w.bev_w; ++j) {
                    const int cls = next.top_class(i, j);
                    if (cls != kVehicle && cls != kPedestrian) continue;
                    bool reachable = false;
                    const int r = g.max_agent_speed;
                    for (int di = -r; di <= r && !reachable; ++di)
                        for (int dj = -r; dj <= r && !reachable; ++dj) {
                            const int ii = i + di, jj = j + dj;
                            if (ii < 0 || jj < 0 || ii >= w.bev_h || jj >= w.bev_w) continue;
                            reachable = now.top_class(ii, jj) == cls;
                        }
                    CHECK(reachable);
                }
        }
    }
}

TEST_CASE("a world without dynamic agents is static in the fixed frame")
{
    GeneratorParams g;
    g.min_vehicles = g.max_vehicles = 0;
    g.min_pedestrians = g.max_pedestrians = 0;
    const SceneEpisode e = generate_episode(3, WorldConfig{}, g);
    for (const auto& grid : e.occ) CHECK(grid.labels == e.occ.front().labels);
}

TEST_CASE("noiseless observations reproduce the top surface")
{
    const WorldConfig w;
    const SceneEpisode e = generate_episode(11, w, GeneratorParams{});
    const Observation o0 = render_observation(e, 0, NoiseParams{0.0, 0.0});
    const auto top = e.occ_at(0).top_surface();
    const int ch = observation_channels(w);
    for (int c = 0; c < w.cells(); ++c) {
        int best = 0;
        for (int k = 1; k < ch; ++k)
            if (o0.values[static_cast<std::size_t>(c) * ch + k] > o0.values[static_cast<std::size_t>(c) * ch + best]) best = k;
        CHECK(best == top[static_cast<std::size_t>(c)]);
    }
}

TEST_CASE("fully masked observations carry only the unobserved channel")
{
    const WorldConfig w;
    const SceneEpisode e = generate_episode(12, w, GeneratorParams{});
    const Observation o = render_observation(e, 0, NoiseParams{0.1, 1.0});
    const int ch = observation_channels(w);
    for (int c = 0; c < w.cells(); ++c)
        for (int k = 0; k < ch; ++k)
            CHECK(o.values[static_cast<std::size_t>(c) * ch + k] == (k == ch - 1 ? 1.0 : 0.0));
}

TEST_CASE("observation noise of scale 0.1 has a mean absolute deviation near 0.08")
{
    const WorldConfig w;
    double total = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const SceneEpisode e = generate_episode(seed, w, GeneratorParams{});
        const Observation clean = render_observation(e, 0, NoiseParams{0.0, 0.0});
        const Observation noisy = render_observation(e, 0, NoiseParams{0.1, 0.0});
        for (std::size_t i = 0; i < clean.values.size(); ++i) {
            total += std::abs(noisy.values[i] - clean.values[i]);
            ++n;
        }
    }
    CHECK(n >= 10000);
    const double mad = total / static_cast<double>(n);
    CHECK(mad >= 0.05);
    CHECK(mad <= 0.15);
}

TEST_CASE("ego deltas")
{
    EgoTrajectory still{0, {{1, 1}, {1, 1}, {1, 1}}};
    CHECK(ego_delta(still, 1).translation == Vec2{0, 0});
    CHECK(ego_delta(still, 1).yaw == 0.0);

    EgoTrajectory line{0, {{0, 0}, {1, 0}, {2, 0}}};
    CHECK(ego_delta(line, 2).translation == Vec2{1, 0});
    CHECK(ego_delta(line, 2).yaw == 0.0);

    EgoTrajectory turn{0, {{0, 0}, {1, 0}, {1, 1}}};
    const EgoMotion m = ego_delta(turn, 2);
    CHECK(m.translation.x == doctest::Approx(0.0));
    CHECK(m.translation.y == doctest::Approx(1.0));
    CHECK(m.yaw == doctest::Approx(std::numbers::pi / 2));

    CHECK_THROWS_AS(ego_delta(line, 5), Error);
}

TEST_CASE("commands follow the 15 degree heading rule")
{
    const double deg = std::numbers::pi / 180.0;
    CHECK(command_from_heading_change(20 * deg) == Command::left);
    CHECK(command_from_heading_change(-20 * deg) == Command::right);
    CHECK(command_from_heading_change(10 * deg) == Command::straight);
    CHECK(command_from_heading_change(-10 * deg) == Command::straight);
}

TEST_CASE("cell geometry round trips")
{
    const WorldConfig w;
    for (int i = 0; i < w.bev_h; i += 5)
        for (int j = 0; j < w.bev_w; j += 7) {
            const Vec2 c = cell_center(w, i, j);
            CHECK(cell_of(w, c) == std::array<int, 2>{i, j});
            const auto rc = continuous_cell(w, c);
            CHECK(rc[0] == doctest::Approx(i));
            CHECK(rc[1] == doctest::Approx(j));
        }
    CHECK(cell_of(w, {1000.0, 0.0})[0] == -1);
}

TEST_CASE("episode files round trip bit-exactly")
{
    const fs::path dir = scratch_dir("roundtrip");
    const SceneEpisode e = generate_episode(5, WorldConfig{}, GeneratorParams{});
    save_episode(e, dir);
    CHECK(fs::exists(dir / "manifest.txt"));
    const SceneEpisode back = load_episode(dir);
    CHECK(back == e);
    CHECK(episode_hash(back) == episode_hash(e));
    fs::remove_all(dir);
}

TEST_CASE("truncated grid file is a shape mismatch")
{
    const fs::path dir = scratch_dir("truncated");
    save_episode(generate_episode(5, WorldConfig{}, GeneratorParams{}), dir);
    fs::resize_file(dir / "occ.bin", fs::file_size(dir / "occ.bin") - 10);
    CHECK(code_of([&] { load_episode(dir); }) == ErrorCode::shape_mismatch);
    fs::remove_all(dir);
}

TEST_CASE("unknown format version is rejected before reading arrays")
{
    const fs::path dir = scratch_dir("version");
    save_episode(generate_episode(5, WorldConfig{}, GeneratorParams{}), dir);
    Manifest m = read_manifest(dir / "manifest.txt");
    m["format_version"] = "99";
    write_manifest(m, dir / "manifest.txt");
    // Arrays removed: a partial load would fail with an I/O error instead.
    fs::remove(dir / "occ.bin");
    CHECK(code_of([&] { load_episode(dir); }) == ErrorCode::format_version);
    fs::remove_all(dir);
}

TEST_CASE("malformed manifest is reported")
{
    const fs::path dir = scratch_dir("malformed");
    save_episode(generate_episode(5, WorldConfig{}, GeneratorParams{}), dir);
    {
        std::ofstream out(dir / "manifest.txt", std::ios::trunc);
        out << "this is not a manifest\n";
    }
    CHECK(code_of([&] { load_episode(dir); }) == ErrorCode::malformed_file);
    fs::remove_all(dir);
}
