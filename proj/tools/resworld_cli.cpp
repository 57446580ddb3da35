// Command-line front end over the C API.

#include "resworld/resworld.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct ApiError {
    rw_status status;
    std::string message;
};

void ok(rw_status s)
{
    if (s != RW_OK) throw ApiError{s, rw_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
    T** out() { return &p; }
    T* get() const { return p; }
};

using Config = Handle<rw_config, rw_config_free>;
using Dataset = Handle<rw_dataset, rw_dataset_free>;
using Model = Handle<rw_model, rw_model_free>;
using Report = Handle<rw_report, rw_report_free>;

std::string take(char* s)
{
    std::string out = s ? s : "";
    rw_string_free(s);
    return out;
}

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> sets;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.sets, "Override a config key, e.g. --set model.dim=32")->take_all();
    cmd->add_option("--seed", o.seed, "Run seed")->check(CLI::NonNegativeNumber);
}

// Starts from `base` (or the defaults) and applies file, overrides and seed.
void build_config(const CommonOptions& o, Config& cfg, const rw_model* base = nullptr)
{
    if (!o.config_path.empty())
        ok(rw_config_load(o.config_path.c_str(), cfg.out()));
    else if (base)
        ok(rw_model_config(base, cfg.out()));
    else
        ok(rw_config_new(cfg.out()));
    for (const auto& s : o.sets) ok(rw_config_set(cfg.get(), s.c_str()));
    if (o.seed >= 0) ok(rw_config_set(cfg.get(), ("seed=" + std::to_string(o.seed)).c_str()));
}

std::string hex(uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ApiError{RW_ERR_IO, "cannot open " + path};
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int cmd_gen_data(const CommonOptions& o, std::string out)
{
    Config cfg;
    build_config(o, cfg);
    if (out.empty()) {
        char* json = nullptr;
        ok(rw_config_get(cfg.get(), "data.dir", &json));
        const std::string text = take(json);
        out = text.size() >= 2 ? text.substr(1, text.size() - 2) : "";
        if (out.empty()) throw ApiError{RW_ERR_INVALID_ARGUMENT, "gen-data needs --out or data.dir"};
    }
    Dataset data;
    ok(rw_dataset_generate(cfg.get(), data.out()));
    ok(rw_dataset_write(data.get(), cfg.get(), out.c_str()));
    int n_train = 0, n_eval = 0;
    uint64_t hash = 0;
    ok(rw_dataset_info(data.get(), &n_train, &n_eval, &hash));
    std::cout << "wrote " << n_train << " train and " << n_eval << " eval episodes to " << out << " (hash " << hex(hash)
              << ")\n";
    return 0;
}

void print_step(void*, int step, double loss, double lr, double teacher_prob)
{
    std::fprintf(stderr, "step %5d  loss %.5f  lr %.3g  teacher %.2f\n", step, loss, lr, teacher_prob);
}

int cmd_train(const CommonOptions& o, bool quiet)
{
    Config cfg;
    build_config(o, cfg);
    const std::string dir = take([&] {
        char* s = nullptr;
        ok(rw_config_run_dir(cfg.get(), &s));
        return s;
    }());
    Dataset data;
    ok(rw_dataset_obtain(cfg.get(), data.out()));
    Model model;
    ok(rw_train(cfg.get(), data.get(), dir.c_str(), quiet ? nullptr : print_step, nullptr, model.out()));
    std::cout << dir << "\n";
    return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& split,
             const std::string& coupling, int max_episodes, std::string out)
{
    Model model;
    ok(rw_model_load(checkpoint.c_str(), model.out()));
    Config cfg;
    build_config(o, cfg, model.get());
    ok(rw_model_check_config(model.get(), cfg.get()));
    Dataset data;
    ok(rw_dataset_obtain(cfg.get(), data.out()));
    Report report;
    ok(rw_evaluate(model.get(), data.get(), split.c_str(), coupling.empty() ? nullptr : coupling.c_str(), max_episodes,
                   report.out()));
    if (out.empty()) out = std::filesystem::path(checkpoint).parent_path().string();
    if (out.empty()) out = ".";
    ok(rw_report_write(report.get(), cfg.get(), out.c_str()));
    char* table = nullptr;
    ok(rw_report_table(report.get(), &table));
    std::cout << take(table);
    return 0;
}

void print_message(void*, const char* msg) { std::fprintf(stderr, "%s\n", msg); }

int cmd_ablate(const CommonOptions& o, const std::string& grid)
{
    Config cfg;
    build_config(o, cfg);
    const std::string spec = read_file(grid);
    char* table = nullptr;
    ok(rw_ablate(spec.c_str(), cfg.get(), print_message, nullptr, &table));
    std::cout << take(table);
    return 0;
}

int cmd_report(const std::string& run)
{
    ok(rw_make_report(run.c_str()));
    std::cout << (std::filesystem::path(run) / "report.md").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"resworld: residual latent world model on a synthetic occupancy grid world"};
    app.require_subcommand(1);

    CommonOptions gen_opts, train_opts, eval_opts, ablate_opts;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "Generate train/eval episodes and write them to disk");
    add_common(gen, gen_opts);
    gen->add_option("--out", gen_out, "Dataset directory (default: data.dir)");

    bool quiet = false;
    auto* tr = app.add_subcommand("train", "Train a model; prints the run directory");
    add_common(tr, train_opts);
    tr->add_flag("--quiet", quiet, "Do not print per-step progress");

    std::string checkpoint, split = "eval", coupling, eval_out;
    int max_episodes = 0;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(ev, eval_opts);
    ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    ev->add_option("--split", split, "train or eval")->check(CLI::IsMember({"train", "eval"}));
    ev->add_option("--coupling", coupling, "Planner coupling")->check(CLI::IsMember({"tight", "semi", "decoupled"}));
    ev->add_option("--max-episodes", max_episodes, "Limit the number of episodes (0: all)");
    ev->add_option("--out", eval_out, "Directory for metrics.txt (default: next to the checkpoint)");

    std::string grid;
    auto* ab = app.add_subcommand("ablate", "Run an ablation grid");
    add_common(ab, ablate_opts);
    ab->add_option("--grid", grid, "Grid spec JSON file")->required()->check(CLI::ExistingFile);

    std::string run;
    auto* rep = app.add_subcommand("report", "Write report.md and loss.svg for a run directory");
    rep->add_option("--run", run, "Run directory")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_opts, gen_out);
        if (tr->parsed()) return cmd_train(train_opts, quiet);
        if (ev->parsed()) return cmd_eval(eval_opts, checkpoint, split, coupling, max_episodes, eval_out);
        if (ab->parsed()) return cmd_ablate(ablate_opts, grid);
        if (rep->parsed()) return cmd_report(run);
    } catch (const ApiError& e) {
        std::cerr << "error (" << rw_status_name(e.status) << "): " << e.message << "\n";
        return 1;
    }
    return 1;
}
