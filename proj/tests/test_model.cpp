#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

#include "error.hpp"
#include "model.hpp"
#include "training.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace rw;
using namespace rw::testing;

namespace {

constexpr double kTol = 1e-4;

void expect_grad(const std::function<Var()>& fn, const std::vector<std::pair<std::string, Var>>& probes)
{
    const auto r = grad_check(fn, probes);
    INFO("worst probe: " << r.worst << " rel error " << r.max_rel_error);
    CHECK(r.entries > 0);
    CHECK(r.vanishing < static_cast<int>(probes.size()));
    CHECK(r.max_rel_error < kTol);
}

WorldConfig grid5()
{
    WorldConfig w;
    w.bev_h = 5;
    w.bev_w = 5;
    return w;
}

Var random_map(const WorldConfig& w, int channels, std::uint64_t seed)
{
    return random_leaf({w.cells(), channels}, seed);
}

std::vector<Observation> random_history(const WorldConfig& w, std::uint64_t seed)
{
    std::vector<Observation> obs;
    for (int t = -w.h_past; t <= 0; ++t) obs.push_back(random_observation(w, t, seed + static_cast<std::uint64_t>(t + 10)));
    return obs;
}

struct TinySetup {
    WorldConfig world = tiny_world();
    ModelConfig model = tiny_model();
    EgoTrajectory ego = curved_ego(tiny_world());
    std::vector<Observation> obs = random_history(tiny_world(), 100);
};

}  // namespace

// ---------------------------------------------------------------------------
// Warp

TEST_CASE("integer translations match brute-force index shifts")
{
    const WorldConfig w = grid5();
    const Var x = random_map(w, 3, 1);
    for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy) {
            const Tensor out = warp_features(x, w, EgoMotion{{double(dx), double(dy)}, 0.0}).value();
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j)
                    for (int c = 0; c < 3; ++c) {
                        const int si = i + dy, sj = j + dx;
                        const bool inside = si >= 0 && si < 5 && sj >= 0 && sj < 5;
                        const double expected = inside ? x.value()[(static_cast<std::size_t>(si) * 5 + sj) * 3 + c] : 0.0;
                        CHECK(out[(static_cast<std::size_t>(i) * 5 + j) * 3 + c] == expected);
                    }
        }
}

TEST_CASE("identity warp is exact")
{
    const WorldConfig w = grid5();
    const Var x = random_map(w, 4, 2);
    CHECK(warp_features(x, w, EgoMotion{}).value() == x.value());
}

TEST_CASE("a +1 cell translation along x moves content one column left")
{
    const WorldConfig w = grid5();
    Tensor t({w.cells(), 1}, 0.0);
    t[2 * 5 + 3] = 1.0;
    const Tensor out = warp_features(ag::constant(t), w, EgoMotion{{1.0, 0.0}, 0.0}).value();
    CHECK(out[2 * 5 + 2] == 1.0);
    CHECK(out[2 * 5 + 3] == 0.0);
}

TEST_CASE("warps compose on interior cells")
{
    const WorldConfig w = grid5();
    const Var x = random_map(w, 2, 3);
    const EgoMotion a{{1.0, 0.0}, std::numbers::pi / 2};
    const EgoMotion b{{0.0, -1.0}, 0.0};
    // out(p) = x(Ra (Rb p + tb) + ta) = x(Ra Rb p + Ra tb + ta)
    const EgoMotion ab{rotate(b.translation, a.yaw) + a.translation, a.yaw + b.yaw};
    const Tensor two = warp_features(warp_features(x, w, a), w, b).value();
    const Tensor one = warp_features(x, w, ab).value();
    int interior = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const Vec2 p = cell_center(w, i, j);
            const Vec2 mid = rotate(p, b.yaw) + b.translation;
            const Vec2 src = rotate(mid, ab.yaw) + ab.translation;
            const Vec2 src2 = rotate(mid, a.yaw) + a.translation;
            if (cell_of(w, mid)[0] < 0 || cell_of(w, src)[0] < 0 || cell_of(w, src2)[0] < 0) continue;
            ++interior;
            for (int c = 0; c < 2; ++c) {
                const std::size_t k = (static_cast<std::size_t>(i) * 5 + j) * 2 + c;
                CHECK(two[k] == doctest::Approx(one[k]).epsilon(1e-12));
            }
        }
    CHECK(interior >= 9);
}

TEST_CASE("warp rejects non-finite and oversized motion")
{
    const WorldConfig w = grid5();
    const Var x = random_map(w, 1, 4);
    CHECK_THROWS_AS(warp_features(x, w, EgoMotion{{NAN, 0.0}, 0.0}), Error);
    CHECK_THROWS_AS(warp_features(x, w, EgoMotion{{10.0, 0.0}, 0.0}), Error);
}

// ---------------------------------------------------------------------------
// Encoder

TEST_CASE("encoder produces one state per history frame")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 1);
    const auto states = encode_scene(s.obs, s.ego, m.encoder, s.world);
    REQUIRE(states.size() == 2);
    for (std::size_t k = 0; k < states.size(); ++k) {
        CHECK(states[k].timestamp == static_cast<int>(k) - s.world.h_past);
        CHECK(states[k].features.shape() == std::vector<int>{s.world.cells(), s.model.dim});
        CHECK(states[k].aligned);
    }
}

TEST_CASE("zero observations through a zero-initialized encoder give zero features")
{
    TinySetup s;
    s.model.zero_init_outputs = true;
    WorldModel m(s.world, s.model, 1);
    std::vector<Observation> obs;
    for (int t = -s.world.h_past; t <= 0; ++t) obs.push_back({t, Tensor({s.world.cells(), s.world.num_classes + 1}, 0.0)});
    for (const auto& st : encode_scene(obs, s.ego, m.encoder, s.world))
        for (double v : st.features.value().values()) CHECK(v == 0.0);
}

TEST_CASE("encoder rejects malformed observation sequences")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 1);
    auto obs = s.obs;
    obs.pop_back();
    CHECK_THROWS_AS(encode_scene(obs, s.ego, m.encoder, s.world), Error);
    auto wrong = s.obs;
    wrong[0].values = Tensor({3, 3}, 0.0);
    CHECK_THROWS_AS(encode_scene(wrong, s.ego, m.encoder, s.world), Error);
}

TEST_CASE("action embeddings cover every delta of the window")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 1);
    CHECK(embed_actions(s.ego, -1, 2, m.encoder, s.world).size() == 3);
    CHECK(embed_actions(s.ego, 0, 1, m.encoder, s.world).size() == 1);
    CHECK_THROWS_AS(embed_actions(s.ego, 0, 0, m.encoder, s.world), Error);
    CHECK_THROWS_AS(embed_actions(s.ego, -5, 1, m.encoder, s.world), Error);
    // The first frame has no predecessor and embeds zero motion.
    const Tensor f = motion_features(delta_or_zero(s.ego, -1), s.world);
    CHECK(f == Tensor({1, 3}, 0.0));
}

TEST_CASE("encoder gradients")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 2);
    jitter_params(m.params, 3);
    std::vector<std::pair<std::string, Var>> probes;
    for (const auto& e : m.params.entries())
        if (e.name.rfind("encoder.", 0) == 0) probes.emplace_back(e.name, e.var);
    expect_grad([&] { return project(encode_frame(s.obs[0], s.ego, m.encoder, s.world).features, 1); }, probes);
}

// ---------------------------------------------------------------------------
// Predictor

TEST_CASE("stream memory is a bounded FIFO")
{
    StreamMemory mem(2);
    CHECK(mem.empty());
    for (int t = 0; t < 4; ++t) mem.push(BEVState{ag::constant(Tensor({1, 1}, double(t))), t, {}, true});
    CHECK(mem.size() == 2);
    CHECK(mem.timestamps() == std::vector<int>{2, 3});
    CHECK(mem.oldest().timestamp == 2);
    CHECK(mem.latest().timestamp == 3);
    CHECK_THROWS_AS(mem.push(BEVState{ag::constant(Tensor({1, 1}, 0.0)), 3, {}, true}), Error);
    CHECK_THROWS_AS(StreamMemory(0), Error);
}

TEST_CASE("residual identity: zero residual projection without alignment returns S0")
{
    for (auto attention : {AttentionKind::deformable, AttentionKind::dense}) {
        TinySetup s;
        s.model.zero_init_outputs = true;
        s.model.feature_alignment = false;
        s.model.attention = attention;
        WorldModel m(s.world, s.model, 5);
        StreamMemory mem = initial_memory(m, encode_scene(s.obs, s.ego, m.encoder, s.world));
        const Tensor s0 = mem.latest().features.value();
        const auto steps = rollout(mem, s.ego, s.world.f_future, m.dynamics());
        REQUIRE(static_cast<int>(steps.size()) == s.world.f_future);
        for (std::size_t k = 0; k < steps.size(); ++k) {
            CHECK(steps[k].state.features.value() == s0);
            CHECK(steps[k].state.timestamp == static_cast<int>(k) + 1);
        }
    }
}

TEST_CASE("rollout without advancing memory leaves it untouched")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 6);
    StreamMemory mem = initial_memory(m, encode_scene(s.obs, s.ego, m.encoder, s.world));
    const auto before = mem.timestamps();
    rollout(mem, s.ego, 2, m.dynamics(), false);
    CHECK(mem.timestamps() == before);
    rollout(mem, s.ego, 2, m.dynamics(), true);
    CHECK(mem.timestamps() == std::vector<int>{1, 2});
    CHECK_THROWS_AS(rollout(mem, s.ego, 1, m.dynamics()), Error);
}

TEST_CASE("compose adds the residual and advances the timestamp")
{
    const Var delta = random_leaf({4, 3}, 1);
    const Var prev = random_leaf({4, 3}, 2);
    BEVState p{prev, 3, {{1.0, 2.0}, 0.5}, true};
    const BEVState out = compose_state(delta, p);
    CHECK(out.timestamp == 4);
    CHECK(!out.aligned);
    for (std::size_t k = 0; k < 12; ++k) CHECK(out.features.value()[k] == delta.value()[k] + prev.value()[k]);
    expect_grad([&] { return project(compose_state(delta, p).features, 3); }, {{"delta", delta}, {"prev", prev}});
    CHECK_THROWS_AS(compose_state(random_leaf({2, 3}, 4), p), Error);
}

TEST_CASE("predictor gradients")
{
    for (auto attention : {AttentionKind::deformable, AttentionKind::dense})
        for (auto cond : {Conditioning::add, Conditioning::cross_attention}) {
            TinySetup s;
            s.model.attention = attention;
            s.model.conditioning = cond;
            WorldModel m(s.world, s.model, 7);
            jitter_params(m.params, 8);
            StreamMemory mem(s.model.memory);
            std::vector<Var> feats;
            for (int t = -1; t <= 0; ++t) {
                feats.push_back(random_leaf({s.world.cells(), s.model.dim}, 20 + static_cast<std::uint64_t>(t + 1)));
                mem.push(BEVState{feats.back(), t, pose_at(s.ego, t), true});
            }
            auto probes = param_probes(m.params);
            std::erase_if(probes, [](const auto& p) { return p.first.rfind("predictor.", 0) != 0; });
            probes.emplace_back("memory.0", feats[0]);
            probes.emplace_back("memory.1", feats[1]);
            INFO("attention " << to_string(attention) << ", conditioning " << to_string(cond));
            expect_grad(
                [&] {
                    std::vector<Var> actions;
                    for (int t : {-1, 0, 1}) actions.push_back(embed_action(s.ego, t, m.encoder, s.world));
                    return project(predict_residual(mem, actions, m.predictor, s.model, s.world), 9);
                },
                probes);
        }
}

TEST_CASE("alignment gradients and structure")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 10);
    jitter_params(m.params, 11);
    const Var f = random_leaf({s.world.cells(), s.model.dim}, 12);
    const BEVState st{f, 1, {}, false};
    const EgoMotion motion{{0.4, -0.2}, 0.1};
    auto probes = param_probes(m.params);
    std::erase_if(probes, [](const auto& p) { return p.first.rfind("align.", 0) != 0; });
    probes.emplace_back("state", f);
    expect_grad([&] { return project(align_features(st, motion, m.align, s.world).aligned.features, 1); }, probes);
    expect_grad([&] { return project(align_features(st, motion, m.align, s.world).occ_logits, 2); }, probes);

    const AlignResult r = align_features(st, motion, m.align, s.world);
    CHECK(r.aligned.aligned);
    CHECK(r.occ_logits.shape() == std::vector<int>{s.world.cells(), s.world.num_classes});
    for (int c = 0; c < s.world.cells(); ++c) {
        double sum = 0.0;
        for (int k = 0; k < s.world.num_classes; ++k) sum += r.occ_probs.value()[static_cast<std::size_t>(c) * s.world.num_classes + k];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("alignment matches a scalar oracle")
{
    // gamma/beta layers reduced to hand-set values so the modulation can be
    // recomputed per element: F = (g_o(P) + g_m) * LN(S) + b_o(P) + b_m.
    TinySetup s;
    WorldModel m(s.world, s.model, 13);
    jitter_params(m.params, 14);
    const Var f = random_leaf({s.world.cells(), s.model.dim}, 15);
    const EgoMotion motion{{1.0, 0.5}, -0.2};
    const AlignResult r = align_features(BEVState{f, 1, {}, false}, motion, m.align, s.world);
    const int d = s.model.dim, c = s.world.num_classes;
    const Tensor& probs = r.occ_probs.value();
    const double mf[3] = {motion.translation.x / s.world.cell_size, motion.translation.y / s.world.cell_size, motion.yaw};
    auto lin = [](const Linear& l, const double* in, int nin, int o) {
        double acc = l.b.value()[static_cast<std::size_t>(o)];
        for (int k = 0; k < nin; ++k) acc += in[k] * l.w.value()[static_cast<std::size_t>(k) * l.out() + o];
        return acc;
    };
    for (int cell = 0; cell < s.world.cells(); ++cell) {
        const double* x = f.value().data() + static_cast<std::size_t>(cell) * d;
        double mean = 0.0, var = 0.0;
        for (int k = 0; k < d; ++k) mean += x[k];
        mean /= d;
        for (int k = 0; k < d; ++k) var += (x[k] - mean) * (x[k] - mean);
        var /= d;
        const double* p = probs.data() + static_cast<std::size_t>(cell) * c;
        for (int o = 0; o < d; ++o) {
            const double ln = (x[o] - mean) / std::sqrt(var + m.align.eps);
            const double expected = (lin(m.align.gamma_occ, p, c, o) + lin(m.align.gamma_motion, mf, 3, o)) * ln +
                                    lin(m.align.beta_occ, p, c, o) + lin(m.align.beta_motion, mf, 3, o);
            CHECK(r.aligned.features.value()[static_cast<std::size_t>(cell) * d + o] ==
                  doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("full rollout step gradients reach every dynamics parameter group")
{
    for (auto mode : {PredictMode::residual, PredictMode::full_reconstruction}) {
        TinySetup s;
        s.model.mode = mode;
        WorldModel m(s.world, s.model, 16);
        jitter_params(m.params, 17);
        auto probes = param_probes(m.params);
        std::erase_if(probes, [](const auto& p) { return p.first.rfind("occ.", 0) == 0 || p.first.rfind("plan.", 0) == 0; });
        INFO("mode " << to_string(mode));
        expect_grad(
            [&] {
                StreamMemory mem = initial_memory(m, encode_scene(s.obs, s.ego, m.encoder, s.world));
                const StepResult r = predict_step(mem, s.ego, m.dynamics());
                return ag::add(project(r.state.features, 1), project(r.align_logits, 2));
            },
            probes);
    }
}

// ---------------------------------------------------------------------------
// Heads

TEST_CASE("occupancy decoder shape, argmax and gradients")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 18);
    jitter_params(m.params, 19);
    const Var f = random_leaf({s.world.cells(), s.model.dim}, 20);
    const BEVState st{f, 1, {}, true};
    const Var logits = decode_occupancy(st, m.occ, s.world);
    CHECK(logits.shape() == std::vector<int>{s.world.voxels(), s.world.num_classes});
    auto probes = param_probes(m.params);
    std::erase_if(probes, [](const auto& p) { return p.first.rfind("occ.", 0) != 0; });
    probes.emplace_back("state", f);
    expect_grad([&] { return project(decode_occupancy(st, m.occ, s.world), 3); }, probes);

    // Decode oracle: argmax over each voxel row with lowest-index ties.
    Tensor t({s.world.voxels(), s.world.num_classes}, 0.0);
    for (int v = 0; v < s.world.voxels(); ++v) t[static_cast<std::size_t>(v) * s.world.num_classes + v % s.world.num_classes] = 1.0;
    t[0] = 1.0;
    t[1] = 1.0;  // tie in voxel 0 between classes 0 and 1
    const SemanticOccGrid g = argmax_grid(t, s.world, 2);
    CHECK(g.timestamp == 2);
    for (int v = 0; v < s.world.voxels(); ++v) CHECK(g.labels[static_cast<std::size_t>(v)] == v % s.world.num_classes);
}

TEST_CASE("plan head gradients")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 21);
    jitter_params(m.params, 22);
    const Var f = random_leaf({s.world.cells(), s.model.dim}, 23);
    const BEVState st{f, 0, {}, true};
    auto probes = param_probes(m.params);
    std::erase_if(probes, [](const auto& p) { return p.first.rfind("plan.", 0) != 0; });
    probes.emplace_back("state", f);
    const std::vector<Vec2> cand{{0.5, 0.1}, {1.0, 0.3}};
    expect_grad([&] { return project(plan_step(st, Command::left, {0.2, 0.1}, m.plan, s.world, 1, &cand).delta, 1); },
                probes);
    expect_grad([&] { return project(plan_all_steps(st, Command::straight, {}, m.plan, s.world), 2); }, probes);
}

TEST_CASE("plan poses accumulate the predicted deltas")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 24);
    jitter_params(m.params, 25);
    const BEVState st{random_leaf({s.world.cells(), s.model.dim}, 26), 0, {}, true};
    const Vec2 pose{0.3, -0.4};
    const PlanStep ps = plan_step(st, Command::right, pose, m.plan, s.world);
    CHECK(ps.pose.x == pose.x + ps.delta.value()[0]);
    CHECK(ps.pose.y == pose.y + ps.delta.value()[1]);
}

TEST_CASE("candidate sampler follows the command filter and index layout")
{
    const WorldConfig w;
    SamplerConfig cfg;
    cfg.speeds = {2.0, 4.0};
    cfg.curvatures = {-0.2, 0.0, 0.2};
    const auto left = sample_candidates(Command::left, cfg, w);
    const auto right = sample_candidates(Command::right, cfg, w);
    const auto straight = sample_candidates(Command::straight, cfg, w);
    CHECK(left.size() == 4);
    CHECK(right.size() == 4);
    CHECK(straight.size() == 2);
    // Straight line at 2 m/s: 1 m per frame.
    for (int k = 0; k < w.f_future; ++k) {
        CHECK(straight[0].positions[static_cast<std::size_t>(k)].x == doctest::Approx(k + 1.0));
        CHECK(straight[0].positions[static_cast<std::size_t>(k)].y == 0.0);
    }
    // Index speed * kept + curvature: left[1] is speed 2, k = 0.2 and curves left.
    CHECK(left[1].positions.back().y > 0.0);
    CHECK(right[0].positions.back().y < 0.0);
    // Arc length along a constant-curvature path equals speed * time.
    const double k = 0.2, s = 2.0 * w.dt * w.f_future;
    CHECK(left[1].positions.back().x == doctest::Approx(std::sin(k * s) / k));
    CHECK(left[1].positions.back().y == doctest::Approx((1 - std::cos(k * s)) / k));

    cfg.curvatures = {0.3};
    CHECK_THROWS_AS(sample_candidates(Command::straight, cfg, w), Error);
}

TEST_CASE("cost filter avoids occupied cells and obeys the command")
{
    const WorldConfig w;
    SamplerConfig cfg;
    cfg.speeds = {2.0};
    cfg.curvatures = {0.0, 0.2};
    const auto cands = sample_candidates(Command::left, cfg, w);
    REQUIRE(cands.size() == 2);

    // Everything free: the left-curving candidate wins through the command term.
    Tensor free_probs({w.voxels(), w.num_classes}, 0.0);
    for (int v = 0; v < w.voxels(); ++v) free_probs[static_cast<std::size_t>(v) * w.num_classes + kFree] = 1.0;
    const CostResult a = cost_filter(cands, free_probs, Command::left, cfg, w);
    CHECK(a.best == 1);
    CHECK(a.costs[0] == doctest::Approx(cfg.deviation_weight * 15.0 * std::numbers::pi / 180.0));

    // Block the end of the curved candidate with a vehicle.
    Tensor blocked = free_probs;
    const Vec2 end = cands[1].positions.back();
    const auto cell = cell_of(w, end);
    REQUIRE(cell[0] >= 0);
    for (int z = 0; z < w.z_bins; ++z) {
        const std::size_t row = ((static_cast<std::size_t>(cell[0]) * w.bev_w + cell[1]) * w.z_bins + z) * w.num_classes;
        blocked[row + kFree] = 0.0;
        blocked[row + kVehicle] = 1.0;
    }
    const CostResult b = cost_filter(cands, blocked, Command::left, cfg, w);
    CHECK(b.best == 0);
    CHECK(b.costs[1] >= a.costs[1] + 1.0);
    CHECK(b.costs[0] == a.costs[0]);

    // Road is drivable and adds no cost.
    Tensor road = free_probs;
    for (int v = 0; v < w.voxels(); ++v) {
        road[static_cast<std::size_t>(v) * w.num_classes + kFree] = 0.0;
        road[static_cast<std::size_t>(v) * w.num_classes + kRoad] = 1.0;
    }
    CHECK(cost_filter(cands, road, Command::left, cfg, w).costs == a.costs);
}

TEST_CASE("coupling modes call the state roller as documented")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 27);
    const auto encoded = encode_scene(s.obs, s.ego, m.encoder, s.world);
    EgoTrajectory history{s.ego.first_frame, {s.ego.at(-1), s.ego.at(0)}};
    const std::vector<Command> commands(static_cast<std::size_t>(s.world.f_future), Command::straight);
    const PlanInputs in{encoded.back(), history, commands};
    SamplerConfig sampler;
    sampler.speeds = {0.5};

    for (auto mode : {Coupling::tight, Coupling::semi, Coupling::decoupled}) {
        int calls = 0;
        const StateRoller roller = [&](const EgoTrajectory& planned, int t) {
            ++calls;
            CHECK(planned.last_frame() == t);
            return encoded.back();
        };
        const PlanResult r = plan_episode(in, mode, m.plan, m.occ, sampler, s.world, roller);
        INFO("mode " << to_string(mode));
        CHECK(static_cast<int>(r.trajectory.positions.size()) == s.world.f_future);
        CHECK(r.positions.shape() == std::vector<int>{s.world.f_future, 2});
        CHECK(r.rollout_calls == calls);
        CHECK(calls == (mode == Coupling::decoupled ? 0 : s.world.f_future - 1));
        CHECK(r.selected.size() == (mode == Coupling::tight ? commands.size() : 0u));
        Vec2 pose = history.at(0);
        for (int k = 0; k < s.world.f_future; ++k) {
            pose = pose + r.deltas[static_cast<std::size_t>(k)];
            CHECK(r.trajectory.positions[static_cast<std::size_t>(k)].x == doctest::Approx(pose.x));
            CHECK(r.positions.value()[static_cast<std::size_t>(2 * k)] == doctest::Approx(pose.x));
        }
    }
    CHECK_THROWS_AS(plan_episode(in, Coupling::semi, m.plan, m.occ, sampler, s.world, StateRoller{}), Error);
}

TEST_CASE("planning latency is ordered tight >= semi >= decoupled")
{
    TinySetup s;
    WorldModel m(s.world, s.model, 28);
    const auto encoded = encode_scene(s.obs, s.ego, m.encoder, s.world);
    const EgoTrajectory history{s.ego.first_frame, {s.ego.at(-1), s.ego.at(0)}};
    const std::vector<Command> commands(static_cast<std::size_t>(s.world.f_future), Command::left);
    const PlanInputs in{encoded.back(), history, commands};
    const Dynamics dyn = m.dynamics();
    const StateRoller roller = [&](const EgoTrajectory& planned, int t) {
        StreamMemory mem = initial_memory(m, encoded);
        BEVState out = mem.latest();
        for (int k = 1; k <= t; ++k) out = rollout_step(mem, planned, dyn).state;
        return out;
    };
    auto median = [&](Coupling mode) {
        const ag::NoGradGuard guard;
        std::vector<double> ms;
        for (int r = 0; r < 15; ++r) ms.push_back(plan_episode(in, mode, m.plan, m.occ, SamplerConfig{}, s.world, roller).latency_ms);
        std::sort(ms.begin(), ms.end());
        return ms[ms.size() / 2];
    };
    const double tight = median(Coupling::tight), semi = median(Coupling::semi), dec = median(Coupling::decoupled);
    CHECK(tight >= semi);
    CHECK(semi >= dec);
}
