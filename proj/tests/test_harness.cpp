#include "support/small_run.hpp"

#include "error.hpp"
#include "harness.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace rw;
using namespace rw::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ok;
}

std::vector<Tensor> param_values(const WorldModel& m)
{
    std::vector<Tensor> out;
    for (const auto& e : m.params.entries()) out.push_back(e.var.value());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST_CASE("default configuration round trips through JSON")
{
    const RunConfig d;
    const RunConfig back = config_from_json(config_to_json(d));
    CHECK(config_to_json(back) == config_to_json(d));
    CHECK(config_hash(back) == config_hash(d));
    CHECK(d.world.h_past == 2);
    CHECK(d.world.f_future == 4);
    CHECK(d.data.train_episodes == 500);
    CHECK(d.data.eval_episodes == 100);
    CHECK(d.train.teacher_forcing_fraction == 0.5);
}

TEST_CASE("unknown keys and wrong types are configuration errors")
{
    json j = config_to_json(RunConfig{});
    CHECK(code_of([&] { apply_override(j, "bad.key=1"); config_from_json(j); }) == ErrorCode::config);
    j = config_to_json(RunConfig{});
    j["model"]["dims"] = 3;
    CHECK(code_of([&] { config_from_json(j); }) == ErrorCode::config);
    j = config_to_json(RunConfig{});
    j["model"]["dim"] = "wide";
    CHECK(code_of([&] { config_from_json(j); }) == ErrorCode::config);
    j = config_to_json(RunConfig{});
    j["world"]["f_future"] = 0;
    CHECK(code_of([&] { config_from_json(j); }) == ErrorCode::config);
}

TEST_CASE("overrides parse JSON values and fall back to strings")
{
    json j = config_to_json(RunConfig{});
    apply_override(j, "model.dim=16");
    apply_override(j, "model.mode=full_reconstruction");
    apply_override(j, "model.feature_alignment=false");
    apply_override(j, "optim.lr=0.001");
    const RunConfig c = config_from_json(j);
    CHECK(c.model.dim == 16);
    CHECK(c.model.mode == PredictMode::full_reconstruction);
    CHECK(!c.model.feature_alignment);
    CHECK(c.optim.lr == 0.001);
    CHECK(code_of([&] { apply_override(j, "no_equals_sign"); }) != ErrorCode::ok);
}

TEST_CASE("architecture hash tracks shape keys only")
{
    RunConfig a;
    RunConfig b = a;
    b.optim.lr = 0.5;
    b.seed = 9;
    CHECK(architecture_hash(a) == architecture_hash(b));
    CHECK(config_hash(a) != config_hash(b));
    b.model.dim = 16;
    CHECK(architecture_hash(a) != architecture_hash(b));
}

TEST_CASE("output root honours the environment override")
{
    RunConfig c;
    c.output_root = "somewhere";
    ::unsetenv("RESWORLD_OUTPUT_ROOT");
    CHECK(resolve_output_root(c) == "somewhere");
    ::setenv("RESWORLD_OUTPUT_ROOT", "/tmp/elsewhere", 1);
    CHECK(resolve_output_root(c) == "/tmp/elsewhere");
    ::unsetenv("RESWORLD_OUTPUT_ROOT");
}

// ---------------------------------------------------------------------------
// Data

TEST_CASE("datasets derive from the data seed and round trip through disk")
{
    RunConfig c = small_run();
    const Dataset a = generate_dataset(c);
    CHECK(a.train.size() == 6);
    CHECK(a.eval.size() == 3);
    CHECK(generate_dataset(c).hash == a.hash);
    c.seed = 1;
    CHECK(generate_dataset(c).hash != a.hash);
    c.data.seed = 0;
    CHECK(generate_dataset(c).hash == a.hash);

    const fs::path dir = fresh_dir("dataset");
    CHECK(write_dataset(a, small_run(), dir) == a.hash);
    const Dataset back = read_dataset(dir, small_run());
    CHECK(back.hash == a.hash);
    CHECK(back.train == a.train);
    RunConfig other = small_run();
    other.seed = 5;
    CHECK(code_of([&] { read_dataset(dir, other); }) == ErrorCode::config);
    fs::remove_all(dir);
}

TEST_CASE("parallel_for visits every index once")
{
    std::vector<int> hits(100, 0);
    parallel_for(100, [&](int i) { hits[static_cast<std::size_t>(i)] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS(parallel_for(10, [](int i) {
        if (i == 7) throw std::runtime_error("boom");
    }));
}

// ---------------------------------------------------------------------------
// Training

TEST_CASE("teacher forcing schedule")
{
    TrainConfig t;
    t.steps = 10;
    t.teacher_forcing_fraction = 0.5;
    CHECK(teacher_schedule(t, 0) == 1.0);
    CHECK(teacher_schedule(t, 4) == 1.0);
    CHECK(teacher_schedule(t, 6) < 1.0);
    CHECK(teacher_schedule(t, 9) >= 0.0);
    for (int s = 1; s < 10; ++s) CHECK(teacher_schedule(t, s) <= teacher_schedule(t, s - 1));
    t.teacher_forcing_fraction = 0.0;
    CHECK(teacher_schedule(t, 0) <= 1.0);
}

TEST_CASE("training with the same seed is bit-identical")
{
    const RunConfig c = small_run();
    const Dataset d = generate_dataset(c);
    const TrainResult a = train(c, d);
    const TrainResult b = train(c, d);
    REQUIRE(a.log.size() == 3);
    for (std::size_t k = 0; k < a.log.size(); ++k) CHECK(a.log[k].loss == b.log[k].loss);
    CHECK(param_values(*a.model) == param_values(*b.model));
    RunConfig other = c;
    other.seed = 3;
    other.data.seed = 0;
    CHECK(param_values(*train(other, d).model) != param_values(*a.model));
}

TEST_CASE("a zero learning rate leaves parameters unchanged")
{
    RunConfig c = small_run();
    c.optim.lr = 0.0;
    c.optim.min_lr = 0.0;
    const Dataset d = generate_dataset(c);
    const TrainResult r = train(c, d);
    const WorldModel fresh(c.world, c.model, c.seed);
    CHECK(param_values(*r.model) == param_values(fresh));
    for (const auto& rec : r.log) CHECK(rec.lr == 0.0);
}

TEST_CASE("non-finite loss aborts training with a divergence record")
{
    RunConfig c = small_run();
    c.optim.lr = 1e300;
    c.optim.grad_clip = 0.0;
    c.train.steps = 4;
    const Dataset d = generate_dataset(c);
    const fs::path dir = fresh_dir("diverge");
    TrainOptions opt;
    opt.run_dir = dir;
    CHECK(code_of([&] { train(c, d, opt); }) == ErrorCode::non_finite);
    CHECK(fs::exists(dir / "divergence.json"));
    fs::remove_all(dir);
}

TEST_CASE("smoothed endpoints")
{
    std::vector<TrainRecord> log;
    for (int k = 0; k < 6; ++k) log.push_back(TrainRecord{.step = k, .loss = double(10 - k)});
    const auto [first, last] = smoothed_endpoints(log, 2);
    CHECK(first == 9.5);
    CHECK(last == 5.5);
}

// ---------------------------------------------------------------------------
// Checkpoints

TEST_CASE("checkpoint round trip reproduces the forward pass exactly")
{
    const RunConfig c = small_run();
    const Dataset d = generate_dataset(c);
    TrainResult r = train(c, d);
    const fs::path dir = fresh_dir("ckpt");
    fs::create_directories(dir);
    save_checkpoint(dir / "c.bin", c, *r.model, r.optimizer.get(), 3);
    const Checkpoint back = load_checkpoint(dir / "c.bin");
    CHECK(back.step == 3);
    CHECK(back.config_hash == config_hash(c));
    CHECK(back.has_optimizer);
    CHECK(back.first_moment == r.optimizer->first_moment());
    CHECK(param_values(*back.model) == param_values(*r.model));

    EvalOptions eo;
    eo.latency = false;
    CHECK(without_timing(evaluate(*back.model, d.eval, c.sampler, eo)) ==
          without_timing(evaluate(*r.model, d.eval, c.sampler, eo)));

    RunConfig wider = c;
    wider.model.dim = 16;
    CHECK(code_of([&] { require_compatible(back, wider); }) == ErrorCode::config);
    RunConfig tuned = c;
    tuned.optim.lr = 0.5;
    CHECK(code_of([&] { require_compatible(back, tuned); }) == ErrorCode::ok);

    // Corruptions.
    fs::copy_file(dir / "c.bin", dir / "trunc.bin");
    fs::resize_file(dir / "trunc.bin", fs::file_size(dir / "trunc.bin") / 2);
    CHECK(code_of([&] { load_checkpoint(dir / "trunc.bin"); }) != ErrorCode::ok);
    {
        std::fstream f(dir / "c.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        const char v = 7;
        f.write(&v, 1);
    }
    CHECK(code_of([&] { load_checkpoint(dir / "c.bin"); }) == ErrorCode::format_version);
    CHECK(code_of([&] { load_checkpoint(dir / "missing.bin"); }) == ErrorCode::io);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Evaluation and reports

TEST_CASE("evaluation is deterministic and reports the documented keys")
{
    const RunConfig c = small_run();
    const Dataset d = generate_dataset(c);
    const TrainResult r = train(c, d);
    for (auto mode : {Coupling::tight, Coupling::semi, Coupling::decoupled}) {
        EvalOptions eo;
        eo.coupling = mode;
        const MetricReport a = evaluate(*r.model, d.eval, c.sampler, eo);
        const MetricReport b = evaluate(*r.model, d.eval, c.sampler, eo);
        CHECK(without_timing(a) == without_timing(b));
        for (const char* key : {"occ.gmo.iou_c", "occ.gmo.iou_f", "occ.gmo.iou_f_weighted", "occ.gso.iou_f",
                                "occ.miou_f", "baseline.gmo.iou_f", "plan.l2.avg", "plan.collision_rate",
                                "eval.episodes", "latency.plan.median_ms"})
            CHECK_MESSAGE(a.has(key), key);
        CHECK(a.has("latency.rollout.median_ms") == (mode != Coupling::decoupled));
        CHECK(a.get("eval.episodes") == 3);
    }
}

TEST_CASE("copy-last baseline is perfect on the current frame")
{
    const RunConfig c = small_run();
    const Dataset d = generate_dataset(c);
    const MetricReport r = evaluate_copy_last(d.eval, c.world);
    CHECK(r.get("baseline.gmo.iou_c") == 100.0);
    CHECK(r.get("baseline.gmo.iou_f") <= 100.0);
}

TEST_CASE("run artifacts and reports")
{
    RunConfig c = small_run();
    const fs::path root = fresh_dir("artifacts");
    c.output_root = root.string();
    c.run_name = "r1";
    CHECK(run_directory(c) == root / "r1");
    c.run_name.clear();
    CHECK(run_directory(c).filename().string().rfind("run-", 0) == 0);
    c.run_name = "r1";

    const Dataset d = generate_dataset(c);
    TrainOptions opt;
    opt.run_dir = run_directory(c);
    int callbacks = 0;
    opt.on_step = [&](const TrainRecord&) { ++callbacks; };
    const TrainResult r = train(c, d, opt);
    CHECK(callbacks == 3);
    for (const char* f : {"config.json", "train_log.jsonl", "checkpoint.bin"}) CHECK(fs::exists(*opt.run_dir / f));
    const auto log = read_train_log(*opt.run_dir / "train_log.jsonl");
    REQUIRE(log.size() == r.log.size());
    CHECK(log.back().loss == r.log.back().loss);

    EvalOptions eo;
    const MetricReport m = evaluate(*r.model, d.eval, c.sampler, eo);
    write_report_files(m, *opt.run_dir, c);
    CHECK(read_metrics(*opt.run_dir / "metrics.txt") == m);
    make_report(*opt.run_dir);
    std::ifstream in(*opt.run_dir / "report.md");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find(hex64(config_hash(c))) != std::string::npos);
    CHECK(fs::exists(*opt.run_dir / "loss.svg"));
    CHECK(loss_svg(log).find("<svg") != std::string::npos);
    fs::remove_all(root);
}

// ---------------------------------------------------------------------------
// Ablation

TEST_CASE("ablation specs are parsed strictly")
{
    const AblationSpec s = parse_ablation(json::parse(R"({"name": "fa", "base": {"model.dim": 8},
        "axes": {"model.feature_alignment": [true, false]}, "seeds": [0, 1]})"));
    CHECK(s.name == "fa");
    REQUIRE(s.axes.size() == 1);
    CHECK(s.axes[0].values.size() == 2);
    CHECK(s.seeds == std::vector<std::uint64_t>{0, 1});
    CHECK(code_of([] { parse_ablation(json::parse(R"({"axes": {}, "typo": 1})")); }) == ErrorCode::config);
    CHECK(code_of([] { parse_ablation(json::parse(R"({"axes": {"model.dim": []}})")); }) == ErrorCode::config);
}

TEST_CASE("ablation cells share one dataset")
{
    json base = small_run_json();
    const fs::path root = fresh_dir("ablation");
    base["output"]["root"] = root.string();
    base["train"]["steps"] = 1;
    const AblationSpec s = parse_ablation(json::parse(R"({"name": "modes",
        "axes": {"model.mode": ["residual", "full_reconstruction"]}, "seeds": [0, 1]})"));
    const auto cells = run_ablation(s, base);
    REQUIRE(cells.size() == 4);
    for (const auto& c : cells) CHECK(c.dataset_hash == cells[0].dataset_hash);
    CHECK(cells[0].config.model.mode != cells[2].config.model.mode);
    const std::string table = ablation_table(cells, default_table_keys(cells[0].config.world));
    CHECK(table.find("full_reconstruction") != std::string::npos);
    CHECK(table.find("Means over seeds") != std::string::npos);
    fs::remove_all(root);
}
