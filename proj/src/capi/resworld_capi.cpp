#include "resworld/resworld.h"

#include "error.hpp"
#include "harness.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

struct rw_config {
    nlohmann::json doc;
    rw::RunConfig cfg;
};

struct rw_dataset {
    rw::Dataset data;
};

struct rw_model {
    rw::RunConfig cfg;
    std::unique_ptr<rw::WorldModel> model;
    std::unique_ptr<rw::AdamW> optimizer;
    std::int64_t step = 0;
};

struct rw_report {
    rw::MetricReport report;
    std::vector<std::pair<std::string, double>> flat;
};

namespace {

thread_local std::string g_last_error;

rw_status record(rw::ErrorCode code, const char* what)
{
    g_last_error = what;
    return static_cast<rw_status>(static_cast<int>(code));
}

template <class F>
rw_status guarded(F&& fn)
{
    try {
        g_last_error.clear();
        fn();
        return RW_OK;
    } catch (const rw::Error& e) {
        return record(e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return record(rw::ErrorCode::config, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return record(rw::ErrorCode::io, e.what());
    } catch (const std::bad_alloc&) {
        return record(rw::ErrorCode::internal, "out of memory");
    } catch (const std::exception& e) {
        return record(rw::ErrorCode::internal, e.what());
    }
}

void require(const void* p, const char* what)
{
    rw::check(p != nullptr, rw::ErrorCode::invalid_argument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    rw::check(out != nullptr, rw::ErrorCode::internal, "out of memory");
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

rw_config* make_config(nlohmann::json doc)
{
    auto c = std::make_unique<rw_config>();
    c->cfg = rw::config_from_json(doc);
    c->doc = rw::config_to_json(c->cfg);
    return c.release();
}

const std::vector<rw::SceneEpisode>& split_of(const rw_dataset* d, const char* split)
{
    const std::string s = split ? split : "eval";
    if (s == "eval") return d->data.eval;
    if (s == "train") return d->data.train;
    rw::fail(rw::ErrorCode::invalid_argument, "unknown split '" + s + "' (expected train or eval)");
}

rw_report* make_report(rw::MetricReport r)
{
    auto out = std::make_unique<rw_report>();
    out->report = std::move(r);
    for (const auto& kv : out->report.values) out->flat.emplace_back(kv.first, kv.second);
    return out.release();
}

}  // namespace

extern "C" {

const char* rw_version(void) { return "0.1.0"; }

const char* rw_last_error(void) { return g_last_error.c_str(); }

const char* rw_status_name(rw_status status)
{
    switch (status) {
    case RW_OK: return "ok";
    case RW_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RW_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case RW_ERR_FORMAT_VERSION: return "format_version";
    case RW_ERR_MALFORMED_FILE: return "malformed_file";
    case RW_ERR_IO: return "io";
    case RW_ERR_CONFIG: return "config";
    case RW_ERR_NON_FINITE: return "non_finite";
    case RW_ERR_OUT_OF_RANGE: return "out_of_range";
    case RW_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void rw_string_free(char* s) { std::free(s); }

rw_status rw_config_new(rw_config** out)
{
    return guarded([&] {
        require(out, "out");
        *out = make_config(nlohmann::json::object());
    });
}

rw_status rw_config_load(const char* path, rw_config** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        std::ifstream in(path);
        rw::check(static_cast<bool>(in), rw::ErrorCode::io, std::string("cannot open config ") + path);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        rw::check(!j.is_discarded(), rw::ErrorCode::config, std::string("config ") + path + " is not valid JSON");
        *out = make_config(j);
    });
}

rw_status rw_config_parse(const char* json_text, rw_config** out)
{
    return guarded([&] {
        require(json_text, "json_text");
        require(out, "out");
        const auto j = nlohmann::json::parse(json_text, nullptr, false);
        rw::check(!j.is_discarded(), rw::ErrorCode::config, "config text is not valid JSON");
        *out = make_config(j);
    });
}

rw_status rw_config_set(rw_config* cfg, const char* assignment)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(assignment, "assignment");
        nlohmann::json doc = cfg->doc;
        rw::apply_override(doc, assignment);
        rw::RunConfig parsed = rw::config_from_json(doc);
        cfg->cfg = std::move(parsed);
        cfg->doc = rw::config_to_json(cfg->cfg);
    });
}

rw_status rw_config_to_json(const rw_config* cfg, char** out)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(out, "out");
        *out = dup_string(cfg->doc.dump(2));
    });
}

rw_status rw_config_get(const rw_config* cfg, const char* key, char** out)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(key, "key");
        require(out, "out");
        std::string path = "/" + std::string(key);
        for (auto& ch : path)
            if (ch == '.') ch = '/';
        const nlohmann::json::json_pointer ptr(path);
        rw::check(cfg->doc.contains(ptr), rw::ErrorCode::config, std::string("unknown config key '") + key + "'");
        *out = dup_string(cfg->doc.at(ptr).dump());
    });
}

rw_status rw_config_hashes(const rw_config* cfg, uint64_t* config_hash, uint64_t* architecture_hash)
{
    return guarded([&] {
        require(cfg, "cfg");
        if (config_hash) *config_hash = rw::config_hash(cfg->cfg);
        if (architecture_hash) *architecture_hash = rw::architecture_hash(cfg->cfg);
    });
}

rw_status rw_config_run_dir(const rw_config* cfg, char** out)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(out, "out");
        *out = dup_string(rw::run_directory(cfg->cfg).string());
    });
}

void rw_config_free(rw_config* cfg) { delete cfg; }

rw_status rw_dataset_generate(const rw_config* cfg, rw_dataset** out)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(out, "out");
        *out = new rw_dataset{rw::generate_dataset(cfg->cfg)};
    });
}

rw_status rw_dataset_obtain(const rw_config* cfg, rw_dataset** out)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(out, "out");
        *out = new rw_dataset{rw::obtain_dataset(cfg->cfg)};
    });
}

rw_status rw_dataset_load(const rw_config* cfg, const char* dir, rw_dataset** out)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(dir, "dir");
        require(out, "out");
        *out = new rw_dataset{rw::read_dataset(dir, cfg->cfg)};
    });
}

rw_status rw_dataset_write(const rw_dataset* data, const rw_config* cfg, const char* dir)
{
    return guarded([&] {
        require(data, "data");
        require(cfg, "cfg");
        require(dir, "dir");
        rw::write_dataset(data->data, cfg->cfg, dir);
    });
}

rw_status rw_dataset_info(const rw_dataset* data, int* train_episodes, int* eval_episodes, uint64_t* hash)
{
    return guarded([&] {
        require(data, "data");
        if (train_episodes) *train_episodes = static_cast<int>(data->data.train.size());
        if (eval_episodes) *eval_episodes = static_cast<int>(data->data.eval.size());
        if (hash) *hash = data->data.hash;
    });
}

void rw_dataset_free(rw_dataset* data) { delete data; }

rw_status rw_train(const rw_config* cfg, const rw_dataset* data, const char* run_dir, rw_step_callback cb,
                   void* user, rw_model** out)
{
    return guarded([&] {
        require(cfg, "cfg");
        require(data, "data");
        require(out, "out");
        rw::TrainOptions opt;
        if (run_dir) opt.run_dir = std::filesystem::path(run_dir);
        if (cb) opt.on_step = [&](const rw::TrainRecord& r) { cb(user, r.step, r.loss, r.lr, r.teacher_prob); };
        rw::TrainResult res = rw::train(cfg->cfg, data->data, opt);
        auto m = std::make_unique<rw_model>();
        m->cfg = cfg->cfg;
        m->model = std::move(res.model);
        m->optimizer = std::move(res.optimizer);
        m->step = cfg->cfg.train.steps;
        *out = m.release();
    });
}

rw_status rw_model_load(const char* checkpoint_path, rw_model** out)
{
    return guarded([&] {
        require(checkpoint_path, "checkpoint_path");
        require(out, "out");
        rw::Checkpoint c = rw::load_checkpoint(checkpoint_path);
        auto m = std::make_unique<rw_model>();
        m->cfg = c.config;
        m->model = std::move(c.model);
        m->step = c.step;
        if (c.has_optimizer) {
            m->optimizer = std::make_unique<rw::AdamW>(m->model->params, m->cfg.optim);
            rw::restore_optimizer(c, *m->optimizer);
        }
        *out = m.release();
    });
}

rw_status rw_model_save(const rw_model* model, const char* checkpoint_path)
{
    return guarded([&] {
        require(model, "model");
        require(checkpoint_path, "checkpoint_path");
        rw::save_checkpoint(checkpoint_path, model->cfg, *model->model, model->optimizer.get(), model->step);
    });
}

rw_status rw_model_check_config(const rw_model* model, const rw_config* cfg)
{
    return guarded([&] {
        require(model, "model");
        require(cfg, "cfg");
        rw::check(rw::architecture_hash(model->cfg) == rw::architecture_hash(cfg->cfg), rw::ErrorCode::config,
                  "checkpoint architecture (" + rw::hex64(rw::architecture_hash(model->cfg)) +
                      ") conflicts with the config (" + rw::hex64(rw::architecture_hash(cfg->cfg)) +
                      "): world or model shape keys differ");
    });
}

rw_status rw_model_config(const rw_model* model, rw_config** out)
{
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = make_config(rw::config_to_json(model->cfg));
    });
}

rw_status rw_model_param_count(const rw_model* model, uint64_t* count)
{
    return guarded([&] {
        require(model, "model");
        require(count, "count");
        *count = model->model->params.scalar_count();
    });
}

void rw_model_free(rw_model* model) { delete model; }

rw_status rw_evaluate(const rw_model* model, const rw_dataset* data, const char* split, const char* coupling,
                      int max_episodes, rw_report** out)
{
    return guarded([&] {
        require(model, "model");
        require(data, "data");
        require(out, "out");
        rw::EvalOptions opt;
        opt.coupling = coupling ? rw::parse_coupling(coupling) : model->cfg.coupling;
        opt.max_episodes = max_episodes > 0 ? max_episodes : 0;
        *out = make_report(rw::evaluate(*model->model, split_of(data, split), model->cfg.sampler, opt));
    });
}

rw_status rw_evaluate_baseline(const rw_dataset* data, const rw_config* cfg, const char* split, int max_episodes,
                               rw_report** out)
{
    return guarded([&] {
        require(data, "data");
        require(cfg, "cfg");
        require(out, "out");
        const auto& all = split_of(data, split);
        const std::size_t n = max_episodes > 0 ? std::min(all.size(), static_cast<std::size_t>(max_episodes)) : all.size();
        const std::vector<rw::SceneEpisode> eps(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
        *out = make_report(rw::evaluate_copy_last(eps, cfg->cfg.world));
    });
}

size_t rw_report_size(const rw_report* report) { return report ? report->flat.size() : 0; }

rw_status rw_report_entry(const rw_report* report, size_t index, const char** key, double* value)
{
    return guarded([&] {
        require(report, "report");
        rw::check(index < report->flat.size(), rw::ErrorCode::out_of_range, "report index out of range");
        if (key) *key = report->flat[index].first.c_str();
        if (value) *value = report->flat[index].second;
    });
}

rw_status rw_report_get(const rw_report* report, const char* key, double* value)
{
    return guarded([&] {
        require(report, "report");
        require(key, "key");
        require(value, "value");
        rw::check(report->report.has(key), rw::ErrorCode::out_of_range, std::string("no metric named ") + key);
        *value = report->report.get(key);
    });
}

rw_status rw_report_text(const rw_report* report, char** out)
{
    return guarded([&] {
        require(report, "report");
        require(out, "out");
        *out = dup_string(report->report.to_text());
    });
}

rw_status rw_report_table(const rw_report* report, char** out)
{
    return guarded([&] {
        require(report, "report");
        require(out, "out");
        *out = dup_string(report->report.to_table());
    });
}

rw_status rw_report_write(const rw_report* report, const rw_config* cfg, const char* dir)
{
    return guarded([&] {
        require(report, "report");
        require(cfg, "cfg");
        require(dir, "dir");
        rw::write_report_files(report->report, dir, cfg->cfg);
    });
}

void rw_report_free(rw_report* report) { delete report; }

rw_status rw_ablate(const char* spec_json, const rw_config* base, rw_message_callback cb, void* user, char** table_out)
{
    return guarded([&] {
        require(spec_json, "spec_json");
        require(base, "base");
        const auto j = nlohmann::json::parse(spec_json, nullptr, false);
        rw::check(!j.is_discarded(), rw::ErrorCode::config, "ablation spec is not valid JSON");
        const rw::AblationSpec spec = rw::parse_ablation(j);
        std::function<void(const std::string&)> progress;
        if (cb) progress = [&](const std::string& msg) { cb(user, msg.c_str()); };
        const auto cells = rw::run_ablation(spec, base->doc, progress);
        const std::string table = rw::ablation_table(cells, rw::default_table_keys(base->cfg.world));
        const auto dir = std::filesystem::path(rw::resolve_output_root(base->cfg)) / spec.name;
        std::filesystem::create_directories(dir);
        std::ofstream md(dir / "summary.md", std::ios::trunc);
        md << "# Ablation " << spec.name << "\n\n" << table;
        std::ofstream jl(dir / "cells.jsonl", std::ios::trunc);
        for (const auto& c : cells) {
            nlohmann::json row{{"label", c.label}, {"seed", c.seed}, {"dataset_hash", rw::hex64(c.dataset_hash)},
                               {"config_hash", rw::hex64(rw::config_hash(c.config))}, {"metrics", c.report.values}};
            jl << row.dump() << '\n';
        }
        rw::check(static_cast<bool>(md) && static_cast<bool>(jl), rw::ErrorCode::io, "cannot write ablation summary");
        if (table_out) *table_out = dup_string(table);
    });
}

rw_status rw_make_report(const char* run_dir)
{
    return guarded([&] {
        require(run_dir, "run_dir");
        rw::make_report(run_dir);
    });
}

}  // extern "C"
