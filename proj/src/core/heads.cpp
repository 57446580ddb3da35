#include "heads.hpp"

#include "error.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace rw {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Var tile_rows(const Var& row, int n)
{
    if (n == 1) return row;
    return ag::concat_rows(std::vector<Var>(static_cast<std::size_t>(n), row));
}

int command_index(Command c)
{
    const int i = static_cast<int>(c);
    check(i >= 0 && i < kCommandCount, ErrorCode::invalid_argument, "unknown command id " + std::to_string(i));
    return i;
}

Var plan_decode(const BEVState& state, Command command, Vec2 pose, const PlanHeadParams& p, const WorldConfig& world,
                const std::vector<int>& steps, const std::vector<Vec2>* candidate)
{
    const int cmd = command_index(command);
    const Var& s = state.features;
    check(s.value().rows() == world.cells() && s.value().cols() == p.queries.value().cols(),
          ErrorCode::shape_mismatch, "plan head: state shape mismatch");
    const int n = static_cast<int>(steps.size());
    const double scale = plan_scale(world);

    const Var adapter = p.adapter2(ag::silu(p.adapter1(s, world.bev_h, world.bev_w)), world.bev_h, world.bev_w);
    const Var mem = ag::add(ag::add(s, adapter), p.positions);

    std::vector<Var> rows;
    for (int k : steps) {
        check(k >= 0 && k < world.f_future, ErrorCode::out_of_range, "plan head: step outside the horizon");
        rows.push_back(ag::slice_rows(p.queries, k, 1));
    }
    const Var q_rows = n == 1 ? rows.front() : ag::concat_rows(rows);

    Tensor cand({1, 2 * world.f_future}, 0.0);
    if (candidate) {
        check(static_cast<int>(candidate->size()) == world.f_future, ErrorCode::invalid_argument,
              "plan head: candidate must hold f_future waypoints");
        for (int k = 0; k < world.f_future; ++k) {
            cand[2 * static_cast<std::size_t>(k)] = (*candidate)[static_cast<std::size_t>(k)].x / scale;
            cand[2 * static_cast<std::size_t>(k) + 1] = (*candidate)[static_cast<std::size_t>(k)].y / scale;
        }
    }
    const Var inp = ag::concat_cols({q_rows, tile_rows(ag::slice_rows(p.commands, cmd, 1), n),
                                     tile_rows(p.candidate(ag::constant(cand)), n)});
    const Var pose_emb = p.pose(ag::constant(Tensor({1, 2}, std::vector<double>{pose.x / scale, pose.y / scale})));
    Var x = ag::add_row(p.input(inp), ag::reshape(pose_emb, {pose_emb.value().cols()}));

    constexpr double eps = 1e-5;
    const Var att = multihead_attention(p.q(ag::layer_norm(x, eps)), p.k(mem), p.v(mem), p.heads);
    x = ag::add(x, p.o(att));
    x = ag::add(x, p.ffn2(ag::silu(p.ffn1(ag::layer_norm(x, eps)))));
    return p.out(ag::layer_norm(x, eps));
}

Vec2 row_vec(const Var& v, int row)
{
    return {v.value()[2 * static_cast<std::size_t>(row)], v.value()[2 * static_cast<std::size_t>(row) + 1]};
}

}  // namespace

OccHeadParams::OccHeadParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng)
    : mlp(ps, "occ_head", model.dim, model.dim, world.z_bins * world.num_classes, rng)
{
}

Var decode_occupancy(const BEVState& state, const OccHeadParams& p, const WorldConfig& world)
{
    check(state.features.value().rows() == world.cells() && state.dim() == p.mlp.fc1.in(),
          ErrorCode::shape_mismatch, "decode_occupancy: state shape does not match the head");
    return ag::reshape(p.mlp(state.features), {world.voxels(), world.num_classes});
}

SemanticOccGrid argmax_grid(const Tensor& logits, const WorldConfig& world, int timestamp)
{
    check(logits.rows() == world.voxels() && logits.cols() == world.num_classes, ErrorCode::shape_mismatch,
          "argmax_grid: logits shape mismatch");
    SemanticOccGrid g(world.bev_h, world.bev_w, world.z_bins, timestamp);
    const int c = world.num_classes;
    for (int v = 0; v < world.voxels(); ++v) {
        const double* row = logits.data() + static_cast<std::size_t>(v) * c;
        int best = 0;
        for (int k = 1; k < c; ++k)
            if (row[k] > row[best]) best = k;
        g.labels[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(best);
    }
    return g;
}

PlanHeadParams::PlanHeadParams(ParamSet& ps, const WorldConfig& world, const ModelConfig& model, Rng& rng)
{
    const int d = model.dim;
    heads = model.heads;
    queries = ps.create("plan.queries", normal_tensor({world.f_future, d}, 1.0, rng));
    commands = ps.create("plan.commands", normal_tensor({kCommandCount, d}, 1.0, rng));
    input = Linear(ps, "plan.input", 3 * d, d, rng);
    pose = Linear(ps, "plan.pose", 2, d, rng);
    candidate = Linear(ps, "plan.candidate", 2 * world.f_future, d, rng);
    adapter1 = Conv(ps, "plan.adapter1", d, d / 4, 3, rng);
    adapter2 = Conv(ps, "plan.adapter2", d / 4, d, 1, rng, Init::zeros);
    positions = ps.create("plan.positions", normal_tensor({world.cells(), d}, 0.1, rng));
    q = Linear(ps, "plan.q", d, d, rng);
    k = Linear(ps, "plan.k", d, d, rng);
    v = Linear(ps, "plan.v", d, d, rng);
    o = Linear(ps, "plan.o", d, d, rng);
    ffn1 = Linear(ps, "plan.ffn1", d, d * model.ffn_mult, rng);
    ffn2 = Linear(ps, "plan.ffn2", d * model.ffn_mult, d, rng);
    out = Mlp(ps, "plan.out", d, d, 2, rng, model.zero_init_outputs ? Init::zeros : Init::normal);
}

double plan_scale(const WorldConfig& world) { return world.bev_w * world.cell_size / 2.0; }

PlanStep plan_step(const BEVState& state, Command command, Vec2 pose, const PlanHeadParams& p,
                   const WorldConfig& world, int step, const std::vector<Vec2>* candidate)
{
    PlanStep r;
    r.delta = plan_decode(state, command, pose, p, world, {step}, candidate);
    r.pose = pose + row_vec(r.delta, 0);
    return r;
}

Var plan_all_steps(const BEVState& state, Command command, Vec2 pose, const PlanHeadParams& p,
                   const WorldConfig& world)
{
    std::vector<int> steps(static_cast<std::size_t>(world.f_future));
    for (int k = 0; k < world.f_future; ++k) steps[static_cast<std::size_t>(k)] = k;
    return plan_decode(state, command, pose, p, world, steps, nullptr);
}

void SamplerConfig::validate() const
{
    check(!speeds.empty(), ErrorCode::config, "sampler: speed grid is empty");
    check(!curvatures.empty(), ErrorCode::config, "sampler: curvature grid is empty");
    for (double s : speeds) check(std::isfinite(s) && s >= 0, ErrorCode::config, "sampler: speeds must be >= 0");
    for (double k : curvatures) check(std::isfinite(k), ErrorCode::config, "sampler: curvatures must be finite");
    check(straight_band >= 0, ErrorCode::config, "sampler: straight_band must be >= 0");
    check(deviation_weight >= 0, ErrorCode::config, "sampler: deviation_weight must be >= 0");
}

std::vector<EgoTrajectory> sample_candidates(Command command, const SamplerConfig& cfg, const WorldConfig& world,
                                             const Pose& origin)
{
    command_index(command);
    check(!cfg.speeds.empty() && !cfg.curvatures.empty(), ErrorCode::invalid_argument,
          "sample_candidates: empty speed or curvature grid");
    std::vector<double> kept;
    for (double k : cfg.curvatures) {
        const bool ok = command == Command::left    ? k >= 0
                        : command == Command::right ? k <= 0
                                                    : std::abs(k) <= cfg.straight_band;
        if (ok) kept.push_back(k);
    }
    check(!kept.empty(), ErrorCode::invalid_argument,
          std::string("sample_candidates: no curvature satisfies command ") + command_name(command));

    std::vector<EgoTrajectory> out;
    out.reserve(cfg.speeds.size() * kept.size());
    for (double v : cfg.speeds)
        for (double k : kept) {
            EgoTrajectory tr;
            tr.first_frame = 1;
            for (int step = 1; step <= world.f_future; ++step) {
                const double s = v * world.dt * step;
                Vec2 local;
                if (k == 0.0) {
                    local = {s, 0.0};
                } else {
                    local = {std::sin(k * s) / k, (1.0 - std::cos(k * s)) / k};
                }
                tr.positions.push_back(origin.position + rotate(local, origin.yaw));
            }
            out.push_back(std::move(tr));
        }
    return out;
}

double command_deviation(Command command, double dtheta)
{
    constexpr double band = 15.0 * std::numbers::pi / 180.0;
    switch (command) {
    case Command::straight: return std::abs(dtheta);
    case Command::left: return std::max(0.0, band - dtheta);
    case Command::right: return std::max(0.0, dtheta + band);
    }
    fail(ErrorCode::invalid_argument, "unknown command");
}

CostResult cost_filter(const std::vector<EgoTrajectory>& candidates, const Tensor& probs, Command command,
                       const SamplerConfig& cfg, const WorldConfig& world, const Pose& origin)
{
    check(!candidates.empty(), ErrorCode::invalid_argument, "cost_filter: no candidates");
    check(probs.rows() == world.voxels() && probs.cols() == world.num_classes, ErrorCode::shape_mismatch,
          "cost_filter: probability map shape mismatch");
    const int c = world.num_classes;
    std::vector<double> occupied(static_cast<std::size_t>(world.cells()), 0.0);
    for (int cell = 0; cell < world.cells(); ++cell) {
        double best = 0.0;
        for (int z = 0; z < world.z_bins; ++z) {
            const double* row = probs.data() + (static_cast<std::size_t>(cell) * world.z_bins + z) * c;
            double m = 1.0 - row[kFree] - (c > kRoad ? row[kRoad] : 0.0);
            best = std::max(best, m);
        }
        occupied[static_cast<std::size_t>(cell)] = best;
    }

    const Footprint fp = Footprint::ego(world);
    CostResult r;
    r.costs.reserve(candidates.size());
    for (const auto& cand : candidates) {
        const auto headings = waypoint_headings(cand.positions, origin.position, origin.yaw);
        double cost = 0.0;
        for (std::size_t k = 0; k < cand.positions.size(); ++k) {
            const Raster ras = rasterize_footprint(world, fp, cand.positions[k], headings[k]);
            for (const auto& cell : ras.cells)
                cost += occupied[static_cast<std::size_t>(cell[0]) * world.bev_w + cell[1]];
        }
        const double dtheta = headings.empty() ? 0.0 : wrap_angle(headings.back() - origin.yaw);
        cost += cfg.deviation_weight * command_deviation(command, dtheta);
        r.costs.push_back(cost);
    }
    for (std::size_t i = 1; i < r.costs.size(); ++i)
        if (r.costs[i] < r.costs[static_cast<std::size_t>(r.best)]) r.best = static_cast<int>(i);
    return r;
}

PlanResult plan_episode(const PlanInputs& in, Coupling mode, const PlanHeadParams& plan, const OccHeadParams& occ,
                        const SamplerConfig& sampler, const WorldConfig& world, const StateRoller& roller)
{
    const int f = world.f_future;
    check(static_cast<int>(in.commands.size()) == f, ErrorCode::invalid_argument,
          "plan_episode: expected one command per future frame");
    check(in.history.has_frame(0), ErrorCode::invalid_argument, "plan_episode: history must include frame 0");
    check(mode == Coupling::decoupled || static_cast<bool>(roller), ErrorCode::invalid_argument,
          "plan_episode: tight and semi coupling need a state roller");
    const auto start = Clock::now();

    PlanResult r;
    r.trajectory.first_frame = 1;
    const Vec2 origin = in.history.at(0);
    Var acc = ag::constant(Tensor({1, 2}, std::vector<double>{origin.x, origin.y}));
    std::vector<Var> rows;

    if (mode == Coupling::decoupled) {
        const Var deltas = plan_all_steps(in.current, in.commands.front(), origin, plan, world);
        Vec2 pose = origin;
        for (int k = 0; k < f; ++k) {
            const Vec2 d = row_vec(deltas, k);
            pose = pose + d;
            r.deltas.push_back(d);
            r.trajectory.positions.push_back(pose);
            acc = ag::add(acc, ag::slice_rows(deltas, k, 1));
            rows.push_back(acc);
        }
    } else {
        EgoTrajectory planned;
        planned.first_frame = in.history.first_frame;
        for (int t = in.history.first_frame; t <= 0; ++t) planned.positions.push_back(in.history.at(t));
        BEVState cur = in.current;
        Vec2 pose = origin;
        for (int t = 0; t < f; ++t) {
            std::vector<Vec2> cand_rel;
            if (mode == Coupling::tight) {
                ag::NoGradGuard guard;
                const Var logits = decode_occupancy(cur, occ, world);
                const Tensor probs = ag::softmax_rows(logits).value();
                const Pose here{pose, heading_at(planned, t)};
                const auto cands = sample_candidates(in.commands[static_cast<std::size_t>(t)], sampler, world, here);
                const CostResult cr =
                    cost_filter(cands, probs, in.commands[static_cast<std::size_t>(t)], sampler, world, here);
                for (const Vec2& w : cands[static_cast<std::size_t>(cr.best)].positions) cand_rel.push_back(w - pose);
                r.candidate_costs.push_back(cr.costs);
                r.selected.push_back(cr.best);
                r.selected_candidates.push_back(cands[static_cast<std::size_t>(cr.best)].positions);
            }
            const PlanStep ps = plan_step(cur, in.commands[static_cast<std::size_t>(t)], pose, plan, world, t,
                                          mode == Coupling::tight ? &cand_rel : nullptr);
            r.deltas.push_back(row_vec(ps.delta, 0));
            pose = ps.pose;
            planned.positions.push_back(pose);
            r.trajectory.positions.push_back(pose);
            acc = ag::add(acc, ps.delta);
            rows.push_back(acc);
            if (t + 1 < f) {
                const auto roll_start = Clock::now();
                cur = roller(planned, t + 1);
                r.rollout_ms += elapsed_ms(roll_start);
                ++r.rollout_calls;
            }
        }
    }
    r.positions = ag::concat_rows(rows);
    r.latency_ms = elapsed_ms(start);
    return r;
}

}  // namespace rw
