// Acceptance runner. Prints one PASS/FAIL line per criterion and writes the
// measured numbers to <output root>/acceptance/acceptance.md.
//
// Criteria 1-5 and 10 are property checks that finish in seconds. Criteria
// 6-9 train 15 models (5 settings x 3 seeds) on one shared dataset.

#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

#include "error.hpp"
#include "harness.hpp"
#include "training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace rw;
using namespace rw::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 3)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string sci(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Residual identity

Outcome residual_identity(const RunConfig& base)
{
    const auto t0 = Clock::now();
    RunConfig cfg = base;
    cfg.model.zero_init_outputs = true;
    cfg.model.feature_alignment = false;
    const SceneEpisode ep = generate_episode(episode_seed(data_seed(cfg), "eval", 0), cfg.world, cfg.generator);
    const WorldModel m(cfg.world, cfg.model, cfg.seed);
    const ag::NoGradGuard guard;
    StreamMemory mem = initial_memory(m, encode_scene(ep.observations, ep.ego, m.encoder, cfg.world));
    const Tensor s0 = mem.latest().features.value();
    const auto steps = rollout(mem, ep.ego, cfg.world.f_future, m.dynamics());
    int equal = 0;
    for (const auto& s : steps) equal += s.state.features.value() == s0;
    const double secs = seconds_since(t0);
    const int f = cfg.world.f_future;
    return {equal == f && secs < 1.0,
            std::to_string(equal) + "/" + std::to_string(f) + " rolled states equal S0 exactly, " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Loss oracles

Outcome loss_oracles()
{
    const auto t0 = Clock::now();
    const ag::NoGradGuard guard;
    int lovasz_bad = 0;
    for (int gt = 0; gt < 512; ++gt) {
        const SemanticOccGrid target = binary_grid(gt);
        for (int pred = 0; pred < 512; ++pred) {
            Tensor probs({9, 2}, 0.0);
            for (int k = 0; k < 9; ++k) probs[static_cast<std::size_t>(2 * k + ((pred >> k) & 1))] = 1.0;
            lovasz_bad += lovasz_loss(ag::constant(probs), target).item() != oracle_lovasz_hard(pred, gt);
        }
    }

    double ce_err = 0.0, bce_err = 0.0, plan_err = 0.0, coll_err = 0.0;
    const WorldConfig tiny = tiny_world();
    WorldConfig w;
    w.bev_h = 10;
    w.bev_w = 12;
    w.z_bins = 2;
    w.f_future = 3;
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const SemanticOccGrid g = random_grid(tiny, 0, rng.next());
        const Var logits = random_leaf({tiny.voxels(), tiny.num_classes}, rng.next(), 2.0);
        ce_err = std::max(ce_err, std::abs(ce_loss(logits, g).item() - oracle_ce(logits.value(), g.labels)));
        const Var x = random_leaf({tiny.voxels()}, rng.next(), 2.0);
        std::vector<double> y;
        for (auto v : g.labels) y.push_back(v != kFree ? 1.0 : 0.0);
        bce_err = std::max(bce_err, std::abs(bce_occ_loss(x, g).item() - oracle_bce(x.value().values(), y)));

        std::vector<SemanticOccGrid> grids;
        for (int t = 1; t <= 3; ++t) grids.push_back(random_grid(w, t, rng.next()));
        std::vector<Vec2> wp, gt;
        Tensor pred({3, 2});
        for (int k = 0; k < 3; ++k) {
            wp.push_back({rng.uniform(-7.0, 7.0), rng.uniform(-6.0, 6.0)});
            gt.push_back({rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)});
            pred[static_cast<std::size_t>(2 * k)] = wp.back().x;
            pred[static_cast<std::size_t>(2 * k + 1)] = wp.back().y;
        }
        const Vec2 origin{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        coll_err = std::max(coll_err, std::abs(collision_loss(wp, grids, w, Pose{origin, 0.0}).value -
                                               oracle_collision(wp, grids, w, origin)));
        LossWeights lw;
        lw.lambda_coll = 0.7;
        const double got = plan_loss(ag::constant(pred), gt, grids, w, Pose{origin, 0.0}, lw).loss.item();
        plan_err = std::max(plan_err, std::abs(got - oracle_plan_loss(wp, gt, grids, w, origin, 0.7)));
    }
    const double secs = seconds_since(t0);
    const double worst = std::max({ce_err, bce_err, plan_err, coll_err});
    return {lovasz_bad == 0 && worst <= 1e-8 && secs < 10.0,
            "lovasz mismatches " + std::to_string(lovasz_bad) + "/262144; max |err| ce " + sci(ce_err) + ", bce " +
                sci(bce_err) + ", plan " + sci(plan_err) + ", collision " + sci(coll_err) + "; " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 3. Gradient checks

using Probes = std::vector<std::pair<std::string, Var>>;

Probes probes_with_prefix(const ParamSet& ps, const std::string& prefix)
{
    Probes out;
    for (const auto& e : ps.entries())
        if (e.name.rfind(prefix, 0) == 0) out.emplace_back(e.name, e.var);
    return out;
}

Outcome gradient_checks()
{
    const auto t0 = Clock::now();
    struct Row {
        std::string name;
        GradCheck r;
        std::size_t probes;
    };
    std::vector<Row> rows;
    auto run = [&](const std::string& name, const std::function<Var()>& fn, const Probes& probes) {
        rows.push_back({name, grad_check(fn, probes), probes.size()});
    };

    const WorldConfig w = tiny_world();
    const ModelConfig mc = tiny_model();
    const EgoTrajectory ego = curved_ego(w);
    std::vector<Observation> obs;
    for (int t = -w.h_past; t <= 0; ++t) obs.push_back(random_observation(w, t, 50 + static_cast<std::uint64_t>(t + 5)));

    {
        WorldModel m(w, mc, 1);
        jitter_params(m.params, 2);
        run("encoder", [&] { return project(encode_frame(obs[0], ego, m.encoder, w).features, 1); },
            probes_with_prefix(m.params, "encoder."));
    }
    for (auto attention : {AttentionKind::deformable, AttentionKind::dense})
        for (auto cond : {Conditioning::add, Conditioning::cross_attention}) {
            ModelConfig c = mc;
            c.attention = attention;
            c.conditioning = cond;
            WorldModel m(w, c, 3);
            jitter_params(m.params, 4);
            StreamMemory mem(c.memory);
            Probes probes = probes_with_prefix(m.params, "predictor.");
            for (int t = -1; t <= 0; ++t) {
                const Var f = random_leaf({w.cells(), c.dim}, 60 + static_cast<std::uint64_t>(t + 1));
                mem.push(BEVState{f, t, pose_at(ego, t), true});
                probes.emplace_back("memory" + std::to_string(t), f);
            }
            run(std::string("predict_residual/") + to_string(attention) + "/" + to_string(cond),
                [&] {
                    std::vector<Var> actions;
                    for (int t : {-1, 0, 1}) actions.push_back(embed_action(ego, t, m.encoder, w));
                    return project(predict_residual(mem, actions, m.predictor, c, w), 5);
                },
                probes);
        }
    {
        const Var delta = random_leaf({w.cells(), mc.dim}, 7), prev = random_leaf({w.cells(), mc.dim}, 8);
        const BEVState p{prev, 0, {}, true};
        run("compose", [&] { return project(compose_state(delta, p).features, 9); }, {{"delta", delta}, {"prev", prev}});
    }
    WorldModel m(w, mc, 10);
    jitter_params(m.params, 11);
    const Var state = random_leaf({w.cells(), mc.dim}, 12);
    const BEVState st{state, 1, {}, false};
    {
        Probes probes = probes_with_prefix(m.params, "align.");
        probes.emplace_back("state", state);
        const EgoMotion motion{{0.4, -0.2}, 0.1};
        run("align",
            [&] {
                const AlignResult r = align_features(st, motion, m.align, w);
                return ag::add(project(r.aligned.features, 13), project(r.occ_logits, 14));
            },
            probes);
    }
    {
        Probes probes = probes_with_prefix(m.params, "occ.");
        probes.emplace_back("state", state);
        run("occupancy_head", [&] { return project(decode_occupancy(st, m.occ, w), 15); }, probes);
    }
    {
        Probes probes = probes_with_prefix(m.params, "plan.");
        probes.emplace_back("state", state);
        const std::vector<Vec2> cand{{0.5, 0.1}, {1.0, 0.3}};
        run("plan_head/step",
            [&] { return project(plan_step(st, Command::left, {0.2, 0.1}, m.plan, w, 1, &cand).delta, 16); }, probes);
        run("plan_head/all_steps", [&] { return project(plan_all_steps(st, Command::straight, {}, m.plan, w), 17); },
            probes);
    }
    for (auto mode : {PredictMode::residual, PredictMode::full_reconstruction}) {
        ModelConfig c = mc;
        c.mode = mode;
        WorldModel mm(w, c, 18);
        jitter_params(mm.params, 19);
        Probes probes = param_probes(mm.params);
        std::erase_if(probes, [](const auto& p) { return p.first.rfind("occ.", 0) == 0 || p.first.rfind("plan.", 0) == 0; });
        run(std::string("rollout_step/") + to_string(mode),
            [&] {
                StreamMemory mem = initial_memory(mm, encode_scene(obs, ego, mm.encoder, w));
                const StepResult r = predict_step(mem, ego, mm.dynamics());
                return ag::add(project(r.state.features, 20), project(r.align_logits, 21));
            },
            probes);
    }

    // Losses.
    const SemanticOccGrid g = random_grid(w, 1, 22);
    const Var logits = random_leaf({w.voxels(), w.num_classes}, 23);
    run("loss/ce", [&] { return ce_loss(logits, g); }, {{"logits", logits}});
    run("loss/lovasz", [&] { return lovasz_loss(ag::softmax_rows(logits), g); }, {{"logits", logits}});
    const Var occ_logit = random_leaf({w.voxels()}, 24);
    run("loss/bce", [&] { return bce_occ_loss(occ_logit, g); }, {{"x", occ_logit}});
    run("loss/occupancy", [&] { return occ_loss({logits}, {g}); }, {{"logits", logits}});
    const Var map_logits = random_leaf({w.cells(), w.num_classes}, 25);
    run("loss/align", [&] { return align_loss(map_logits, g); }, {{"logits", map_logits}});
    const Var a = random_leaf({w.cells(), 3}, 26), b = random_leaf({w.cells(), 3}, 27);
    run("loss/tss", [&] { return tss_loss(a, b); }, {{"predicted", a}, {"encoded", b}});
    {
        WorldConfig pw;
        pw.bev_h = 8;
        pw.bev_w = 8;
        pw.z_bins = 1;
        SemanticOccGrid pg(8, 8, 1, 1);
        pg.set(3, 3, 0, kPedestrian);
        const Var pred = ag::Var::leaf(Tensor({2, 2}, std::vector<double>{0.4, 0.0, 1.4, 0.25}));
        run("loss/plan",
            [&] { return plan_loss(pred, {{1.0, 0.0}, {2.0, 0.0}}, {pg, pg}, pw, Pose{}, LossWeights{}).loss; },
            {{"pred", pred}});
    }
    {
        const Var p1 = random_leaf({1}, 28), p2 = random_leaf({1}, 29), p3 = random_leaf({1}, 30), p4 = random_leaf({1}, 31);
        LossWeights lw;
        lw.lambda_plan = 0.5;
        lw.lambda_tss = 0.2;
        run("loss/total", [&] { return total_loss({p1, p2, p3, p4}, lw).total; },
            {{"align", p1}, {"occ", p2}, {"plan", p3}, {"tss", p4}});
    }

    double worst = 0.0;
    std::string worst_name;
    int entries = 0;
    bool degenerate = false;
    for (const auto& r : rows) {
        entries += r.r.entries;
        degenerate = degenerate || r.r.entries == 0 || r.r.vanishing >= static_cast<int>(r.probes);
        if (r.r.max_rel_error >= worst) {
            worst = r.r.max_rel_error;
            worst_name = r.name + ":" + r.r.worst;
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && !degenerate && secs < 120.0,
            std::to_string(rows.size()) + " functions, " + std::to_string(entries) + " coordinates; max rel error " +
                sci(worst) + " (" + worst_name + "); " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 4. Warp

Outcome warp_checks()
{
    WorldConfig w;
    w.bev_h = 5;
    w.bev_w = 5;
    const Var x = random_leaf({w.cells(), 3}, 77);
    int shift_bad = 0, shifts = 0;
    for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy) {
            ++shifts;
            const Tensor out = warp_features(x, w, EgoMotion{{double(dx), double(dy)}, 0.0}).value();
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j)
                    for (int c = 0; c < 3; ++c) {
                        const int si = i + dy, sj = j + dx;
                        const bool inside = si >= 0 && si < 5 && sj >= 0 && sj < 5;
                        const double want = inside ? x.value()[(static_cast<std::size_t>(si) * 5 + sj) * 3 + c] : 0.0;
                        shift_bad += out[(static_cast<std::size_t>(i) * 5 + j) * 3 + c] != want;
                    }
        }
    const bool identity = warp_features(x, w, EgoMotion{}).value() == x.value();

    // warp(warp(x, a), b) == warp(x, a o b) for grid-aligned motions, on cells
    // whose intermediate and final reads stay inside the window.
    double comp_err = 0.0;
    int interior = 0;
    const EgoMotion pairs[][2] = {{{{1.0, 0.0}, std::numbers::pi / 2}, {{0.0, -1.0}, 0.0}},
                                  {{{-1.0, 1.0}, 0.0}, {{1.0, 1.0}, -std::numbers::pi / 2}},
                                  {{{0.0, 1.0}, std::numbers::pi}, {{1.0, 0.0}, std::numbers::pi / 2}}};
    for (const auto& pr : pairs) {
        const EgoMotion& a = pr[0];
        const EgoMotion& b = pr[1];
        const EgoMotion ab{rotate(b.translation, a.yaw) + a.translation, a.yaw + b.yaw};
        const Tensor two = warp_features(warp_features(x, w, a), w, b).value();
        const Tensor one = warp_features(x, w, ab).value();
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                const Vec2 mid = rotate(cell_center(w, i, j), b.yaw) + b.translation;
                const Vec2 src = rotate(mid, a.yaw) + a.translation;
                auto inside = [&](Vec2 p) { return cell_of(w, p)[0] >= 0; };
                if (!inside(mid) || !inside(src)) continue;
                ++interior;
                for (int c = 0; c < 3; ++c) {
                    const std::size_t k = (static_cast<std::size_t>(i) * 5 + j) * 3 + c;
                    comp_err = std::max(comp_err, std::abs(two[k] - one[k]));
                }
            }
    }
    return {shift_bad == 0 && identity && comp_err <= 1e-12 && interior > 0,
            std::to_string(shifts) + " integer shifts, " + std::to_string(shift_bad) + " mismatches; identity " +
                (identity ? "exact" : "NOT exact") + "; composition max |err| " + sci(comp_err) + " over " +
                std::to_string(interior) + " interior cells"};
}

// ---------------------------------------------------------------------------
// 5. Metric oracles

Outcome metric_oracles()
{
    int iou_bad = 0;
    for (int a = 0; a < 512; ++a)
        for (int b = 0; b < 512; ++b) {
            const int inter = __builtin_popcount(static_cast<unsigned>(a & b));
            const int uni = __builtin_popcount(static_cast<unsigned>(a | b));
            iou_bad += iou(binary_grid(a), binary_grid(b), {1}) != (uni == 0 ? 1.0 : static_cast<double>(inter) / uni);
        }

    Rng rng(5150);
    const WorldConfig tiny = tiny_world();
    int convex_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int f = rng.uniform_int(1, 5);
        std::vector<SemanticOccGrid> pred, gt;
        for (int t = 0; t <= f; ++t) {
            pred.push_back(random_grid(tiny, t, rng.next()));
            gt.push_back(random_grid(tiny, t, rng.next()));
        }
        std::vector<double> weights;
        if (trial % 2) {
            double s = 0.0;
            for (int t = 0; t < f; ++t) s += weights.emplace_back(rng.uniform());
            for (double& v : weights) v /= s;
        }
        const ForecastIoU r = forecast_metrics(pred, gt, {kVehicle, kPedestrian}, weights);
        const auto [lo, hi] = std::minmax_element(r.per_step.begin(), r.per_step.end());
        convex_bad += r.iou_f_weighted < *lo - 1e-12 || r.iou_f_weighted > *hi + 1e-12;
    }

    WorldConfig w;
    w.bev_h = 12;
    w.bev_w = 12;
    w.z_bins = 1;
    int monotone_bad = 0, additions = 0;
    for (int trial = 0; trial < 50; ++trial) {
        CollisionCase c;
        for (int k = 1; k <= 3; ++k) c.waypoints.push_back({k + rng.uniform(-0.3, 0.3), rng.uniform(-1.0, 1.0)});
        c.occupancy.assign(3, SemanticOccGrid(12, 12, 1, 0));
        double prev = collision_rate({c}, w, Footprint{});
        for (int add = 0; add < 30; ++add, ++additions) {
            c.occupancy[static_cast<std::size_t>(rng.uniform_int(0, 2))].set(
                rng.uniform_int(0, 11), rng.uniform_int(0, 11), 0, rng.uniform() < 0.5 ? kVehicle : kPedestrian);
            const double now = collision_rate({c}, w, Footprint{});
            monotone_bad += now < prev;
            prev = now;
        }
    }
    return {iou_bad == 0 && convex_bad == 0 && monotone_bad == 0,
            "iou mismatches " + std::to_string(iou_bad) + "/262144; convexity violations " + std::to_string(convex_bad) +
                "/1000; collision-rate decreases " + std::to_string(monotone_bad) + "/" + std::to_string(additions)};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::string file_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const RunConfig& base, const fs::path& out)
{
    const auto t0 = Clock::now();
    RunConfig cfg = base;
    cfg.train.steps = 4;
    cfg.data.train_episodes = 16;
    cfg.data.eval_episodes = 8;
    const Dataset data = generate_dataset(cfg);
    const fs::path da = out / "determinism" / "a", db = out / "determinism" / "b";
    fs::remove_all(out / "determinism");
    TrainOptions oa, ob;
    oa.run_dir = da;
    ob.run_dir = db;
    const TrainResult ra = train(cfg, data, oa);
    const TrainResult rb = train(cfg, data, ob);
    const bool logs = file_bytes(da / "train_log.jsonl") == file_bytes(db / "train_log.jsonl");
    const bool ckpts = file_bytes(da / "checkpoint.bin") == file_bytes(db / "checkpoint.bin");

    EvalOptions eo;
    eo.coupling = cfg.coupling;
    const MetricReport ma = without_timing(evaluate(*ra.model, data.eval, cfg.sampler, eo));
    const MetricReport mb = without_timing(evaluate(*rb.model, data.eval, cfg.sampler, eo));

    const Checkpoint back = load_checkpoint(da / "checkpoint.bin");
    bool params = back.model->params.entries().size() == ra.model->params.entries().size();
    for (std::size_t k = 0; params && k < back.model->params.entries().size(); ++k)
        params = back.model->params.entries()[k].var.value() == ra.model->params.entries()[k].var.value();
    const MetricReport mc = without_timing(evaluate(*back.model, data.eval, cfg.sampler, eo));
    save_checkpoint(da / "resaved.bin", back.config, *back.model, nullptr, back.step);
    save_checkpoint(da / "original.bin", cfg, *ra.model, nullptr, cfg.train.steps);
    const bool resave = file_bytes(da / "resaved.bin") == file_bytes(da / "original.bin");

    const bool pass = logs && ckpts && ma == mb && params && mc == ma && resave;
    auto yn = [](bool b) { return b ? "yes" : "no"; };
    return {pass, std::string("train logs identical ") + yn(logs) + ", checkpoints identical " + yn(ckpts) +
                      ", reports identical " + yn(ma == mb) + " (" + std::to_string(ma.values.size()) +
                      " keys); round trip: params " + yn(params) + ", report " + yn(mc == ma) + ", re-save bytes " +
                      yn(resave) + "; " + fmt(seconds_since(t0), 1) + " s"};
}

// ---------------------------------------------------------------------------
// 6-9. Learning runs

struct Setting {
    std::string name;
    std::vector<std::string> overrides;
};

const std::vector<Setting>& settings()
{
    static const std::vector<Setting> s{
        {"base", {}},
        {"full_reconstruction", {"model.mode=full_reconstruction"}},
        {"decoupled", {"planning.coupling=decoupled"}},
        {"tight", {"planning.coupling=tight"}},
        {"fa_off", {"model.feature_alignment=false"}},
    };
    return s;
}

struct RunOutcome {
    MetricReport report;
    std::vector<TrainRecord> log;
    std::size_t params = 0;
    double seconds = 0.0;
};

RunOutcome run_cell(const RunConfig& cfg, const Dataset& data, const fs::path& dir, bool reuse)
{
    RunOutcome r;
    if (reuse && fs::exists(dir / "metrics.txt") && fs::exists(dir / "config.json") && fs::exists(dir / "checkpoint.bin")) {
        std::ifstream in(dir / "config.json");
        if (json::parse(in) == config_to_json(cfg)) {
            r.report = read_metrics(dir / "metrics.txt");
            r.log = read_train_log(dir / "train_log.jsonl");
            r.params = load_checkpoint(dir / "checkpoint.bin").model->params.scalar_count();
            r.seconds = r.report.has("acceptance.run_seconds") ? r.report.get("acceptance.run_seconds") : 0.0;
            return r;
        }
    }
    const auto t0 = Clock::now();
    TrainOptions opt;
    opt.run_dir = dir;
    const TrainResult tr = train(cfg, data, opt);
    EvalOptions eo;
    eo.coupling = cfg.coupling;
    eo.max_episodes = cfg.eval.max_episodes;
    r.report = evaluate(*tr.model, data.eval, cfg.sampler, eo);
    r.seconds = seconds_since(t0);
    r.report.set("acceptance.run_seconds", r.seconds);
    write_report_files(r.report, dir, cfg);
    r.log = tr.log;
    r.params = tr.model->params.scalar_count();
    return r;
}

double mean_of(const std::vector<RunOutcome>& runs, const std::string& key)
{
    double s = 0.0;
    for (const auto& r : runs) s += r.report.get(key);
    return s / static_cast<double>(runs.size());
}

std::string per_seed(const std::vector<RunOutcome>& runs, const std::string& key, int precision = 2)
{
    std::string out;
    for (const auto& r : runs) out += (out.empty() ? "" : ", ") + fmt(r.report.get(key), precision);
    return "[" + out + "]";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks: one PASS/FAIL line per criterion."};
    std::string config_path;
    std::vector<std::string> overrides;
    std::vector<int> only;
    std::string out_dir;
    bool reuse = false;
    int seeds = 3;
    app.add_option("--config", config_path, "Base run configuration (JSON)");
    app.add_option("--set", overrides, "Override a base configuration key (key=value)");
    app.add_option("--only", only, "Run only these criteria (e.g. --only 1,2,3)")->delimiter(',')->check(CLI::Range(1, 10));
    app.add_option("--out", out_dir, "Output directory (default: <output root>/acceptance)");
    app.add_flag("--reuse", reuse, "Reuse finished learning runs whose configuration matches");
    app.add_option("--seeds", seeds, "Seeds per setting for criteria 7-9")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const auto t_start = Clock::now();
    RunConfig base;
    json base_json;
    try {
        base_json = config_path.empty() ? config_to_json(RunConfig{}) : config_to_json(load_config(config_path));
        for (const auto& o : overrides) apply_override(base_json, o);
        base = config_from_json(base_json);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    const fs::path out = out_dir.empty() ? fs::path(resolve_output_root(base)) / "acceptance" : fs::path(out_dir);
    fs::create_directories(out);
    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int c) { return selected.empty() || selected.count(c) != 0; };

    std::map<int, Outcome> results;
    std::vector<std::string> notes;
    auto report = [&](int id, const std::string& title, const Outcome& o) {
        results[id] = o;
        std::cout << "criterion " << id << (id < 10 ? "  " : " ") << (o.pass ? "PASS" : "FAIL") << "  " << title << ": "
                  << o.detail << std::endl;
    };
    auto guarded = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        try {
            report(id, title, fn());
        } catch (const std::exception& e) {
            report(id, title, {false, std::string("error: ") + e.what()});
        }
    };

    std::cout << "base config " << hex64(config_hash(base)) << ", output " << out.string() << std::endl;
    guarded(1, "residual identity", [&] { return residual_identity(base); });
    guarded(2, "loss oracles", [&] { return loss_oracles(); });
    guarded(3, "gradient checks", [&] { return gradient_checks(); });
    guarded(4, "warp correctness", [&] { return warp_checks(); });
    guarded(5, "metric oracles", [&] { return metric_oracles(); });

    if (wanted(6) || wanted(7) || wanted(8) || wanted(9)) {
        std::map<std::string, std::vector<RunOutcome>> runs;
        Dataset data;
        bool ok = true;
        try {
            // Every cell trains on the dataset of the base seed.
            RunConfig data_cfg = base;
            data_cfg.data.seed = static_cast<std::int64_t>(data_seed(base));
            data = obtain_dataset(data_cfg);
            std::cout << "dataset " << hex64(data.hash) << ": " << data.train.size() << " train / " << data.eval.size()
                      << " eval episodes" << std::endl;
            const bool learning = wanted(7) || wanted(8) || wanted(9);
            for (const auto& s : settings()) {
                if (!learning && s.name != "base") continue;
                const bool needed = s.name == "base" || (s.name == "full_reconstruction" && wanted(7)) ||
                                    ((s.name == "decoupled" || s.name == "tight") && wanted(8)) ||
                                    (s.name == "fa_off" && wanted(9));
                if (!needed) continue;
                const int n = learning ? seeds : 1;
                for (int k = 0; k < n; ++k) {
                    json j = base_json;
                    for (const auto& o : s.overrides) apply_override(j, o);
                    j["seed"] = base.seed + static_cast<std::uint64_t>(k);
                    j["data"]["seed"] = data_cfg.data.seed;
                    const RunConfig cfg = config_from_json(j);
                    const fs::path dir = out / "runs" / (s.name + "-seed" + std::to_string(k));
                    RunOutcome r = run_cell(cfg, data, dir, reuse);
                    std::cout << "  run " << s.name << " seed " << k << ": gmo iou_f "
                              << fmt(r.report.get("occ.gmo.iou_f"), 2) << ", gso iou_f "
                              << fmt(r.report.get("occ.gso.iou_f"), 2) << ", plan l2 "
                              << fmt(r.report.get("plan.l2.avg"), 3) << ", " << fmt(r.seconds, 0) << " s" << std::endl;
                    runs[s.name].push_back(std::move(r));
                }
            }
        } catch (const std::exception& e) {
            ok = false;
            for (int id = 6; id <= 9; ++id)
                if (wanted(id)) report(id, "learning runs", {false, std::string("error: ") + e.what()});
        }

        if (ok && wanted(6)) {
            const RunOutcome& r = runs.at("base").front();
            const auto [first, last] = smoothed_endpoints(r.log, 20);
            const double model = r.report.get("occ.gmo.iou_f");
            const double floor = r.report.get("baseline.gmo.iou_f");
            const bool pass = last < first && model >= floor + 5.0 && r.seconds < 20 * 60;
            report(6, "learning smoke test",
                   {pass, "smoothed loss " + fmt(first) + " -> " + fmt(last) + " over " + std::to_string(r.log.size()) +
                              " steps; GMO IoU_f " + fmt(model, 2) + " vs copy-last " + fmt(floor, 2) + " (margin " +
                              fmt(model - floor, 2) + ", need >= 5); " + fmt(r.seconds, 0) + " s"});
        }
        if (ok && wanted(7)) {
            const auto& res = runs.at("base");
            const auto& rec = runs.at("full_reconstruction");
            const double pr = static_cast<double>(res.front().params), pf = static_cast<double>(rec.front().params);
            const double a = mean_of(res, "occ.gmo.iou_f"), b = mean_of(rec, "occ.gmo.iou_f");
            const bool matched = std::abs(pr - pf) <= 0.01 * pr;
            report(7, "residual vs reconstruction",
                   {matched && a >= b, "GMO IoU_f residual " + fmt(a, 2) + " " + per_seed(res, "occ.gmo.iou_f") +
                                           " vs full_reconstruction " + fmt(b, 2) + " " +
                                           per_seed(rec, "occ.gmo.iou_f") + "; params " + fmt(pr, 0) + " vs " +
                                           fmt(pf, 0)});
        }
        if (ok && wanted(8)) {
            const auto& semi = runs.at("base");
            const auto& dec = runs.at("decoupled");
            const auto& tight = runs.at("tight");
            const double ls = mean_of(semi, "plan.l2.avg"), ld = mean_of(dec, "plan.l2.avg"),
                         lt = mean_of(tight, "plan.l2.avg");
            const double ts = mean_of(semi, "latency.plan.median_ms"), td = mean_of(dec, "latency.plan.median_ms"),
                         tt = mean_of(tight, "latency.plan.median_ms");
            const bool l2_ok = ls < ld && std::abs(lt - ls) <= 0.1 * ls;
            const bool lat_ok = tt > ts && ts > td;
            report(8, "coupling trend",
                   {l2_ok && lat_ok, "avg L2 semi " + fmt(ls) + " " + per_seed(semi, "plan.l2.avg", 3) + ", decoupled " +
                                         fmt(ld) + " " + per_seed(dec, "plan.l2.avg", 3) + ", tight " + fmt(lt) + " " +
                                         per_seed(tight, "plan.l2.avg", 3) + " (tight/semi " + fmt(lt / ls) +
                                         "); median latency tight " + fmt(tt, 1) + " > semi " + fmt(ts, 1) +
                                         " > decoupled " + fmt(td, 1) + " ms: " + (lat_ok ? "yes" : "no")});
        }
        if (ok && wanted(9)) {
            const auto& on = runs.at("base");
            const auto& off = runs.at("fa_off");
            const double a = mean_of(on, "occ.gso.iou_f"), b = mean_of(off, "occ.gso.iou_f");
            report(9, "feature alignment trend",
                   {a >= b, "GSO IoU_f FA-on " + fmt(a, 2) + " " + per_seed(on, "occ.gso.iou_f") + " vs FA-off " +
                                fmt(b, 2) + " " + per_seed(off, "occ.gso.iou_f") + " (delta " + fmt(a - b, 2) + ")"});
        }
    }

    guarded(10, "determinism", [&] { return determinism(base, out); });

    const double total = seconds_since(t_start);
    int passed = 0;
    for (const auto& [id, o] : results) passed += o.pass;
    std::cout << passed << "/" << results.size() << " criteria passed in " << fmt(total / 60.0, 1) << " min"
              << std::endl;

    std::ofstream md(out / "acceptance.md");
    md << "# Acceptance\n\nbase config " << hex64(config_hash(base)) << ", total " << fmt(total / 60.0, 1)
       << " min\n\n| criterion | result | detail |\n|---|---|---|\n";
    for (const auto& [id, o] : results) md << "| " << id << " | " << (o.pass ? "PASS" : "FAIL") << " | " << o.detail << " |\n";
    return passed == static_cast<int>(results.size()) ? 0 : 1;
}
