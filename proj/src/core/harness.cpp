#include "harness.hpp"

#include "binary_io.hpp"
#include "episode_io.hpp"
#include "error.hpp"
#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void write_text(const fs::path& file, const std::string& text)
{
    std::ofstream out(file, std::ios::trunc);
    check(static_cast<bool>(out), ErrorCode::io, "cannot write " + file.string());
    out << text;
    check(static_cast<bool>(out), ErrorCode::io, "write failed for " + file.string());
}

std::string read_text(const fs::path& file)
{
    std::ifstream in(file);
    check(static_cast<bool>(in), ErrorCode::io, "cannot open " + file.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

EgoTrajectory history_of(const SceneEpisode& ep)
{
    EgoTrajectory h;
    h.first_frame = ep.ego.first_frame;
    for (int t = ep.ego.first_frame; t <= 0; ++t) h.positions.push_back(ep.ego.at(t));
    return h;
}

}  // namespace

json TrainRecord::to_json() const
{
    return json{{"step", step},       {"lr", lr},         {"teacher_prob", teacher_prob},
                {"loss", loss},       {"align", align},   {"occ", occ},
                {"plan", plan},       {"tss", tss},       {"plan_l2", plan_l2},
                {"collision", collision}, {"grad_norm", grad_norm}};
}

TrainRecord TrainRecord::from_json(const json& j)
{
    TrainRecord r;
    r.step = j.at("step").get<int>();
    r.lr = j.at("lr").get<double>();
    r.teacher_prob = j.at("teacher_prob").get<double>();
    r.loss = j.at("loss").get<double>();
    r.align = j.at("align").get<double>();
    r.occ = j.at("occ").get<double>();
    r.plan = j.at("plan").get<double>();
    r.tss = j.at("tss").get<double>();
    r.plan_l2 = j.at("plan_l2").get<double>();
    r.collision = j.at("collision").get<double>();
    r.grad_norm = j.at("grad_norm").get<double>();
    return r;
}

double teacher_schedule(const TrainConfig& cfg, int step)
{
    const double forced = cfg.teacher_forcing_fraction * cfg.steps;
    if (step < forced) return 1.0;
    const double remaining = cfg.steps - forced;
    if (remaining <= 1.0) return 0.0;
    return std::clamp(1.0 - (step - forced) / (remaining - 1.0), 0.0, 1.0);
}

fs::path run_directory(const RunConfig& cfg)
{
    const std::string name = cfg.run_name.empty() ? "run-" + hex64(config_hash(cfg)).substr(0, 12) : cfg.run_name;
    return fs::path(resolve_output_root(cfg)) / name;
}

TrainResult train(const RunConfig& cfg, const Dataset& data, const TrainOptions& opt)
{
    cfg.validate();
    check(!data.train.empty(), ErrorCode::invalid_argument, "train: the training split is empty");
    for (const auto& ep : data.train)
        check(ep.config == cfg.world, ErrorCode::config, "train: dataset world config differs from the run config");

    TrainResult res;
    res.model = std::make_unique<WorldModel>(cfg.world, cfg.model, cfg.seed);
    res.optimizer = std::make_unique<AdamW>(res.model->params, cfg.optim);
    WorldModel& model = *res.model;
    Rng batch_rng = Rng::substream(cfg.seed, "sampling.batch");
    Rng teacher_rng = Rng::substream(cfg.seed, "sampling.teacher");

    std::ofstream log;
    if (opt.run_dir) {
        fs::create_directories(*opt.run_dir);
        write_text(*opt.run_dir / "config.json", config_to_json(cfg).dump(2) + "\n");
        log.open(*opt.run_dir / "train_log.jsonl", std::ios::trunc);
        check(static_cast<bool>(log), ErrorCode::io, "cannot write the training log");
    }

    const int n = static_cast<int>(data.train.size());
    const int batch = cfg.train.batch_size;
    const double inv_b = 1.0 / batch;
    for (int step = 0; step < cfg.train.steps; ++step) {
        TrainRecord rec;
        rec.step = step;
        rec.lr = cosine_lr(cfg.optim, step, cfg.train.steps);
        rec.teacher_prob = teacher_schedule(cfg.train, step);
        model.params.zero_grad();

        std::vector<int> picked;
        json parts = json::array();
        auto diverge = [&](const std::string& what) {
            json dump{{"step", step}, {"lr", rec.lr}, {"teacher_prob", rec.teacher_prob},
                      {"batch_indices", picked}, {"losses", parts}, {"reason", what}};
            json seeds = json::array();
            for (int i : picked) seeds.push_back(data.train[static_cast<std::size_t>(i)].seed);
            dump["episode_seeds"] = seeds;
            std::string where;
            if (opt.run_dir) {
                write_text(*opt.run_dir / "divergence.json", dump.dump(2) + "\n");
                where = " (diagnostics in " + (*opt.run_dir / "divergence.json").string() + ")";
            } else {
                where = ": " + dump.dump();
            }
            fail(ErrorCode::non_finite, "training diverged at step " + std::to_string(step) + ", " + what + where);
        };

        for (int b = 0; b < batch; ++b) {
            const int idx = batch_rng.uniform_int(0, n - 1);
            picked.push_back(idx);
            EpisodeForwardOptions fo;
            fo.coupling = cfg.coupling;
            fo.weights = cfg.loss;
            fo.teacher_prob = rec.teacher_prob;
            fo.sampling = &teacher_rng;
            fo.sampler = cfg.sampler;
            EpisodeLoss el;
            try {
                el = episode_loss(model, data.train[static_cast<std::size_t>(idx)], fo);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::non_finite) throw;
                diverge(e.what());
            }
            const double total = el.total.total.item();
            parts.push_back({{"total", total}, {"align", el.total.align}, {"occ", el.total.occ},
                             {"plan", el.total.plan}, {"tss", el.total.tss}});
            if (!std::isfinite(total)) diverge("non-finite loss");
            ag::backward(ag::scale(el.total.total, inv_b));
            rec.loss += inv_b * total;
            rec.align += inv_b * el.total.align;
            rec.occ += inv_b * el.total.occ;
            rec.plan += inv_b * el.total.plan;
            rec.tss += inv_b * el.total.tss;
            rec.plan_l2 += inv_b * el.plan_l2;
            rec.collision += inv_b * el.collision;
        }
        try {
            rec.grad_norm = res.optimizer->step(model.params, rec.lr);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::non_finite) throw;
            diverge(e.what());
        }
        if (step % cfg.train.log_every == 0 || step + 1 == cfg.train.steps) {
            res.log.push_back(rec);
            if (log.is_open()) log << rec.to_json().dump() << '\n' << std::flush;
        }
        if (opt.on_step) opt.on_step(rec);
    }
    if (opt.run_dir) save_checkpoint(*opt.run_dir / "checkpoint.bin", cfg, model, res.optimizer.get(), cfg.train.steps);
    return res;
}

std::pair<double, double> smoothed_endpoints(const std::vector<TrainRecord>& log, int window)
{
    check(!log.empty() && window >= 1, ErrorCode::invalid_argument, "smoothed_endpoints: empty log");
    const int n = static_cast<int>(log.size());
    const int w = std::min(window, n);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < w; ++i) {
        first += log[static_cast<std::size_t>(i)].loss;
        last += log[static_cast<std::size_t>(n - 1 - i)].loss;
    }
    return {first / w, last / w};
}

namespace {

struct NamedSet {
    std::string key;  // report prefix
    ClassSet classes;
};

std::vector<NamedSet> report_sets(const WorldConfig& world)
{
    const ClassGroups g = group_classes(world);
    std::vector<NamedSet> sets{{"gmo", g.gmo}, {"gso", g.gso}};
    for (const auto& c : g.per_class) sets.push_back({std::string("class.") + class_name(c.front()), c});
    return sets;
}

// counts[set][frame], summed over episodes in index order.
using FrameCounts = std::vector<std::vector<IoUCounts>>;

void add_forecast_keys(MetricReport& r, const std::string& prefix, const std::vector<NamedSet>& sets,
                       const FrameCounts& counts, int f)
{
    const std::vector<double> w = time_weights(f);
    double miou_c = 0.0, miou_f = 0.0;
    int classes = 0;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        const auto& c = counts[s];
        double iou_f = 0.0, weighted = 0.0;
        for (int t = 1; t <= f; ++t) {
            const double v = c[static_cast<std::size_t>(t)].ratio();
            iou_f += v / f;
            weighted += w[static_cast<std::size_t>(t - 1)] * v;
        }
        const std::string key = prefix + sets[s].key;
        r.set(key + ".iou_c", 100.0 * c[0].ratio());
        r.set(key + ".iou_f", 100.0 * iou_f);
        r.set(key + ".iou_f_weighted", 100.0 * weighted);
        if (sets[s].key == "gmo" || sets[s].key == "gso")
            for (int t = 1; t <= f; ++t) r.set(key + ".iou_t" + std::to_string(t), 100.0 * c[static_cast<std::size_t>(t)].ratio());
        if (sets[s].key.rfind("class.", 0) == 0) {
            miou_c += c[0].ratio();
            miou_f += iou_f;
            ++classes;
        }
    }
    if (classes > 0) {
        r.set(prefix + "miou_c", 100.0 * miou_c / classes);
        r.set(prefix + "miou_f", 100.0 * miou_f / classes);
    }
}

FrameCounts reduce_counts(const std::vector<FrameCounts>& per_episode, std::size_t sets, int frames)
{
    FrameCounts total(sets, std::vector<IoUCounts>(static_cast<std::size_t>(frames)));
    for (const auto& ep : per_episode)
        for (std::size_t s = 0; s < sets; ++s)
            for (int t = 0; t < frames; ++t) total[s][static_cast<std::size_t>(t)] += ep[s][static_cast<std::size_t>(t)];
    return total;
}

FrameCounts count_frames(const std::vector<SemanticOccGrid>& pred, const SceneEpisode& ep,
                         const std::vector<NamedSet>& sets)
{
    FrameCounts c(sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s)
        for (std::size_t t = 0; t < pred.size(); ++t)
            c[s].push_back(iou_counts(pred[t], ep.occ_at(static_cast<int>(t)), sets[s].classes));
    return c;
}

int episode_limit(const std::vector<SceneEpisode>& episodes, int max_episodes)
{
    const int n = static_cast<int>(episodes.size());
    return max_episodes > 0 ? std::min(n, max_episodes) : n;
}

}  // namespace

MetricReport evaluate_copy_last(const std::vector<SceneEpisode>& episodes, const WorldConfig& world,
                                const std::string& prefix)
{
    check(!episodes.empty(), ErrorCode::invalid_argument, "evaluate: no episodes");
    const int f = world.f_future;
    const auto sets = report_sets(world);
    std::vector<FrameCounts> per(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        std::vector<SemanticOccGrid> pred;
        for (int t = 0; t <= f; ++t) {
            SemanticOccGrid g = episodes[i].occ_at(0);
            g.timestamp = t;
            pred.push_back(std::move(g));
        }
        per[i] = count_frames(pred, episodes[i], sets);
    }
    MetricReport r;
    add_forecast_keys(r, prefix, sets, reduce_counts(per, sets.size(), f + 1), f);
    return r;
}

MetricReport evaluate(const WorldModel& model, const std::vector<SceneEpisode>& all, const SamplerConfig& sampler,
                      const EvalOptions& opt)
{
    const int n = episode_limit(all, opt.max_episodes);
    check(n > 0, ErrorCode::invalid_argument, "evaluate: no episodes");
    const std::vector<SceneEpisode> episodes(all.begin(), all.begin() + n);
    const WorldConfig& world = model.world;
    for (const auto& ep : episodes)
        check(ep.config == world, ErrorCode::config, "evaluate: episode world config differs from the model's");
    const int f = world.f_future;
    const Dynamics dyn = model.dynamics();
    const auto sets = report_sets(world);

    MetricReport r;
    r.set("eval.episodes", n);

    // Occupancy forecasting with logged actions.
    std::vector<FrameCounts> per(episodes.size());
    parallel_for(n, [&](int i) {
        ag::NoGradGuard guard;
        const SceneEpisode& ep = episodes[static_cast<std::size_t>(i)];
        StreamMemory mem = initial_memory(model, encode_scene(ep.observations, ep.ego, model.encoder, world));
        std::vector<SemanticOccGrid> pred{argmax_grid(decode_occupancy(mem.latest(), model.occ, world).value(), world, 0)};
        for (const auto& step : rollout(mem, ep.ego, f, dyn))
            pred.push_back(
                argmax_grid(decode_occupancy(step.state, model.occ, world).value(), world, step.state.timestamp));
        per[static_cast<std::size_t>(i)] = count_frames(pred, ep, sets);
    });
    add_forecast_keys(r, "occ.", sets, reduce_counts(per, sets.size(), f + 1), f);
    for (const auto& [k, v] : evaluate_copy_last(episodes, world).values) r.set(k, v);

    if (!opt.planning) return r;

    // Open-loop planning, timed one episode at a time on this thread.
    const auto horizons = planning_horizons(world);
    std::vector<double> l2_sum(horizons.size(), 0.0);
    double l2_avg = 0.0;
    std::vector<CollisionCase> cases;
    std::vector<double> plan_ms, rollout_ms;
    double rollout_calls = 0.0;
    for (const auto& ep : episodes) {
        ag::NoGradGuard guard;
        const auto start = Clock::now();
        StreamMemory mem = initial_memory(model, encode_scene(ep.observations, ep.ego, model.encoder, world));
        StreamMemory rolled = mem;
        const StateRoller roller = [&](const EgoTrajectory& planned, int) {
            return rollout_step(rolled, planned, dyn).state;
        };
        const EgoTrajectory history = history_of(ep);
        const PlanInputs in{mem.latest(), history, ep.commands};
        const PlanResult plan = plan_episode(in, opt.coupling, model.plan, model.occ, sampler, world, roller);
        plan_ms.push_back(ms_since(start));
        rollout_ms.push_back(plan.rollout_ms);
        rollout_calls += plan.rollout_calls;

        std::vector<Vec2> gt;
        std::vector<SemanticOccGrid> occ;
        for (int t = 1; t <= f; ++t) {
            gt.push_back(ep.ego.at(t));
            occ.push_back(ep.occ_at(t));
        }
        const L2Result l2 = l2_planning(plan.trajectory.positions, gt, horizons);
        for (std::size_t h = 0; h < horizons.size(); ++h) l2_sum[h] += l2.per_horizon[h];
        l2_avg += l2.average;
        cases.push_back({plan.trajectory.positions, std::move(occ), pose_at(ep.ego, 0)});
    }
    for (std::size_t h = 0; h < horizons.size(); ++h) r.set("plan.l2." + horizons[h].label, l2_sum[h] / n);
    r.set("plan.l2.avg", l2_avg / n);
    r.set("plan.collision_rate", collision_rate(cases, world, Footprint::ego(world)));
    r.set("plan.rollout_calls", rollout_calls / n);

    if (opt.latency) {
        // The first episode warms caches and allocators.
        auto trimmed = [&](std::vector<double> v) {
            if (v.size() > 1) v.erase(v.begin());
            return latency_stats(std::move(v));
        };
        const LatencyStats total = trimmed(plan_ms);
        r.set("latency.plan.median_ms", total.median_ms);
        r.set("latency.plan.p90_ms", total.p90_ms);
        if (opt.coupling != Coupling::decoupled) {
            const LatencyStats roll = trimmed(rollout_ms);
            r.set("latency.rollout.median_ms", roll.median_ms);
            r.set("latency.rollout.p90_ms", roll.p90_ms);
        }
    }
    return r;
}

bool is_timing_key(const std::string& key) { return key.rfind("latency.", 0) == 0; }

MetricReport without_timing(const MetricReport& r)
{
    MetricReport out;
    for (const auto& [k, v] : r.values)
        if (!is_timing_key(k)) out.set(k, v);
    return out;
}

void write_report_files(const MetricReport& r, const fs::path& dir, const RunConfig& cfg)
{
    fs::create_directories(dir);
    const std::string header = "# config_hash = " + hex64(config_hash(cfg)) +
                               "\n# architecture_hash = " + hex64(architecture_hash(cfg)) + "\n";
    write_text(dir / "metrics.txt", header + r.to_text());
    std::ostringstream md;
    md << "| key | value |\n|---|---|\n";
    md << std::fixed << std::setprecision(3);
    for (const auto& [k, v] : r.values) md << "| " << k << " | " << v << " |\n";
    write_text(dir / "metrics.md", md.str());
}

MetricReport read_metrics(const fs::path& file)
{
    MetricReport r;
    for (const auto& [k, v] : read_manifest(file)) {
        char* end = nullptr;
        const double d = std::strtod(v.c_str(), &end);
        check(end != v.c_str() && *end == '\0', ErrorCode::malformed_file, "metric '" + k + "' is not a number");
        r.set(k, d);
    }
    return r;
}

std::vector<TrainRecord> read_train_log(const fs::path& file)
{
    std::ifstream in(file);
    check(static_cast<bool>(in), ErrorCode::io, "cannot open " + file.string());
    std::vector<TrainRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        check(!j.is_discarded(), ErrorCode::malformed_file, "training log line is not JSON: " + line);
        out.push_back(TrainRecord::from_json(j));
    }
    return out;
}

AblationSpec parse_ablation(const json& j)
{
    check(j.is_object(), ErrorCode::config, "ablation spec must be an object");
    AblationSpec s;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "name") {
            check(it->is_string() && !it->get<std::string>().empty(), ErrorCode::config, "ablation name must be a string");
            s.name = it->get<std::string>();
        } else if (k == "base") {
            check(it->is_object(), ErrorCode::config, "ablation base must map dotted keys to values");
            s.base = *it;
        } else if (k == "axes") {
            check(it->is_object(), ErrorCode::config, "ablation axes must map dotted keys to value lists");
            for (auto a = it->begin(); a != it->end(); ++a) {
                check(a->is_array() && !a->empty(), ErrorCode::config, "ablation axis " + a.key() + " needs values");
                s.axes.push_back({a.key(), std::vector<json>(a->begin(), a->end())});
            }
        } else if (k == "seeds") {
            check(it->is_array() && !it->empty(), ErrorCode::config, "ablation seeds must be a non-empty list");
            s.seeds.clear();
            for (const auto& v : *it) {
                check(v.is_number_unsigned(), ErrorCode::config, "ablation seeds must be non-negative integers");
                s.seeds.push_back(v.get<std::uint64_t>());
            }
        } else {
            fail(ErrorCode::config, "unknown ablation key '" + k + "'");
        }
    }
    return s;
}

namespace {

std::string value_label(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::vector<AblationCell> run_ablation(const AblationSpec& spec, const json& base_config,
                                       const std::function<void(const std::string&)>& progress)
{
    json base = base_config;
    for (auto it = spec.base.begin(); it != spec.base.end(); ++it) set_dotted(base, it.key(), *it);
    // Validate the base before any work.
    const RunConfig base_cfg = config_from_json(base);
    if (base_cfg.data.seed < 0) set_dotted(base, "data.seed", static_cast<std::int64_t>(base_cfg.seed));

    std::vector<std::vector<std::size_t>> combos{{}};
    for (const auto& axis : spec.axes) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& c : combos)
            for (std::size_t v = 0; v < axis.values.size(); ++v) {
                auto e = c;
                e.push_back(v);
                next.push_back(std::move(e));
            }
        combos = std::move(next);
    }

    std::map<std::string, Dataset> datasets;
    std::vector<AblationCell> cells;
    for (const auto& combo : combos) {
        json cell_json = base;
        std::string label;
        for (std::size_t a = 0; a < spec.axes.size(); ++a) {
            const json& v = spec.axes[a].values[combo[a]];
            set_dotted(cell_json, spec.axes[a].key, v);
            label += (label.empty() ? "" : ",") + spec.axes[a].key + "=" + value_label(v);
        }
        if (label.empty()) label = "base";
        for (std::uint64_t seed : spec.seeds) {
            json j = cell_json;
            j["seed"] = seed;
            std::string dir_label = label;
            std::replace(dir_label.begin(), dir_label.end(), ',', '_');
            std::replace(dir_label.begin(), dir_label.end(), '=', '-');
            set_dotted(j, "output.name", spec.name + "/" + dir_label + "/seed" + std::to_string(seed));
            AblationCell cell;
            cell.label = label;
            cell.seed = seed;
            cell.config = config_from_json(j);
            const RunConfig& cfg = cell.config;

            const json cj = config_to_json(cfg);
            const std::string data_key = cj.at("world").dump() + cj.at("generator").dump() + cj.at("data").dump();
            if (!datasets.count(data_key)) datasets.emplace(data_key, obtain_dataset(cfg));
            const Dataset& data = datasets.at(data_key);
            cell.dataset_hash = data.hash;

            if (progress) progress("cell " + label + " seed " + std::to_string(seed) + ": training");
            const fs::path dir = run_directory(cfg);
            TrainOptions to;
            to.run_dir = dir;
            const TrainResult tr = train(cfg, data, to);
            const auto ends = smoothed_endpoints(tr.log, 20);
            cell.first_loss = ends.first;
            cell.last_loss = ends.second;

            if (progress) progress("cell " + label + " seed " + std::to_string(seed) + ": evaluating");
            EvalOptions eo;
            eo.coupling = cfg.coupling;
            eo.max_episodes = cfg.eval.max_episodes;
            cell.report = evaluate(*tr.model, data.eval, cfg.sampler, eo);
            cell.report.set("train.loss_first", cell.first_loss);
            cell.report.set("train.loss_last", cell.last_loss);
            cell.report.set("params", static_cast<double>(tr.model->params.scalar_count()));
            write_report_files(cell.report, dir, cfg);
            make_report(dir);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

std::vector<std::string> default_table_keys(const WorldConfig& world)
{
    std::vector<std::string> keys{"occ.gmo.iou_c", "occ.gmo.iou_f",  "occ.gmo.iou_f_weighted", "occ.gso.iou_f",
                                  "occ.miou_f",    "baseline.gmo.iou_f", "plan.l2.avg", "plan.collision_rate",
                                  "latency.plan.median_ms"};
    (void)world;
    return keys;
}

std::string ablation_table(const std::vector<AblationCell>& cells, const std::vector<std::string>& keys)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "| cell | seed | data |";
    for (const auto& k : keys) os << ' ' << k << " |";
    os << "\n|---|---|---|";
    for (std::size_t k = 0; k < keys.size(); ++k) os << "---|";
    os << '\n';
    auto value = [](const MetricReport& r, const std::string& k) { return r.has(k) ? r.get(k) : std::nan(""); };
    for (const auto& c : cells) {
        os << "| " << c.label << " | " << c.seed << " | " << hex64(c.dataset_hash).substr(0, 8) << " |";
        for (const auto& k : keys) os << ' ' << value(c.report, k) << " |";
        os << '\n';
    }
    std::vector<std::string> labels;
    for (const auto& c : cells)
        if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
    os << "\nMeans over seeds:\n\n| cell | seeds |";
    for (const auto& k : keys) os << ' ' << k << " |";
    os << "\n|---|---|";
    for (std::size_t k = 0; k < keys.size(); ++k) os << "---|";
    os << '\n';
    for (const auto& l : labels) {
        int count = 0;
        std::vector<double> sum(keys.size(), 0.0);
        for (const auto& c : cells) {
            if (c.label != l) continue;
            ++count;
            for (std::size_t k = 0; k < keys.size(); ++k) sum[k] += value(c.report, keys[k]);
        }
        os << "| " << l << " | " << count << " |";
        for (double s : sum) os << ' ' << s / count << " |";
        os << '\n';
    }
    return os.str();
}

std::string loss_svg(const std::vector<TrainRecord>& log)
{
    const double width = 640, height = 360, left = 60, right = 20, top = 20, bottom = 40;
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (log.empty()) {
        os << "<text x=\"" << width / 2 << "\" y=\"" << height / 2 << "\" text-anchor=\"middle\">no data</text>\n</svg>\n";
        return os.str();
    }
    double lo = log.front().loss, hi = lo;
    for (const auto& r : log) {
        lo = std::min(lo, r.loss);
        hi = std::max(hi, r.loss);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const int first = log.front().step;
    const int span = std::max(1, log.back().step - first);
    auto px = [&](int step) { return left + (width - left - right) * (step - first) / span; };
    auto py = [&](double v) { return top + (height - top - bottom) * (hi - v) / (hi - lo); };

    os << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
       << height - bottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    }
    os << "<text x=\"" << left << "\" y=\"" << height - bottom + 16 << "\">" << first << "</text>\n";
    os << "<text x=\"" << width - right << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"end\">"
       << log.back().step << "</text>\n";
    os << "<text x=\"" << (width + left) / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">step</text>\n";

    os << "<polyline fill=\"none\" stroke=\"#9ecae1\" stroke-width=\"1\" points=\"";
    for (const auto& r : log) os << px(r.step) << ',' << py(r.loss) << ' ';
    os << "\"/>\n";
    const int window = std::max(1, static_cast<int>(log.size()) / 20);
    os << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
    double acc = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        acc += log[i].loss;
        if (i >= static_cast<std::size_t>(window)) acc -= log[i - static_cast<std::size_t>(window)].loss;
        const double mean = acc / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
        os << px(log[i].step) << ',' << py(mean) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << width - right << "\" y=\"" << top + 10 << "\" text-anchor=\"end\" fill=\"#08519c\">"
       << "total loss, moving average over " << window << " steps</text>\n";
    os << "</svg>\n";
    return os.str();
}

void make_report(const fs::path& run_dir)
{
    std::ostringstream md;
    md << "# Run report: " << run_dir.filename().string() << "\n\n";
    if (fs::exists(run_dir / "config.json")) {
        const json j = json::parse(read_text(run_dir / "config.json"), nullptr, false);
        check(!j.is_discarded(), ErrorCode::malformed_file, "config.json is not valid JSON");
        const RunConfig cfg = config_from_json(j);
        md << "- config hash: `" << hex64(config_hash(cfg)) << "`\n";
        md << "- architecture hash: `" << hex64(architecture_hash(cfg)) << "`\n";
        md << "- seed " << cfg.seed << ", coupling " << to_string(cfg.coupling) << ", mode "
           << to_string(cfg.model.mode) << ", feature alignment " << (cfg.model.feature_alignment ? "on" : "off")
           << "\n\n";
    }
    if (fs::exists(run_dir / "train_log.jsonl")) {
        const auto log = read_train_log(run_dir / "train_log.jsonl");
        write_text(run_dir / "loss.svg", loss_svg(log));
        if (!log.empty()) {
            const int w = std::min<int>(20, static_cast<int>(log.size()));
            const auto [first, last] = smoothed_endpoints(log, w);
            md << "## Training\n\n" << log.size() << " logged steps. Mean total loss over the first " << w << ": "
               << format_double(first) << "; over the last " << w << ": " << format_double(last) << ".\n\n"
               << "![loss](loss.svg)\n\n";
        }
    }
    if (fs::exists(run_dir / "metrics.txt")) {
        const MetricReport r = read_metrics(run_dir / "metrics.txt");
        md << "## Metrics\n\n```\n" << r.to_table() << "```\n";
    }
    write_text(run_dir / "report.md", md.str());
}

}  // namespace rw
