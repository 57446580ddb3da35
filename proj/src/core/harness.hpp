#pragma once

// Training, evaluation, ablation and reporting.
//
// A run directory holds:
//   config.json       resolved configuration
//   train_log.jsonl   one JSON object per logged step
//   checkpoint.bin    final parameters and optimizer state
//   metrics.txt       "key = value" report, metrics.md the same as a table
//   report.md, loss.svg  written by make_report

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "metrics.hpp"

#include <functional>
#include <optional>

namespace rw {

struct TrainRecord {
    int step = 0;
    double lr = 0.0;
    double teacher_prob = 0.0;
    double loss = 0.0;
    double align = 0.0;
    double occ = 0.0;
    double plan = 0.0;
    double tss = 0.0;
    double plan_l2 = 0.0;
    double collision = 0.0;
    double grad_norm = 0.0;

    nlohmann::json to_json() const;
    static TrainRecord from_json(const nlohmann::json& j);
};

// 1 for the leading teacher-forced share of steps, then linear decay to 0.
double teacher_schedule(const TrainConfig& cfg, int step);

struct TrainOptions {
    std::optional<std::filesystem::path> run_dir;  // artifacts are written when set
    std::function<void(const TrainRecord&)> on_step;
};

struct TrainResult {
    std::vector<TrainRecord> log;
    std::unique_ptr<WorldModel> model;
    std::unique_ptr<AdamW> optimizer;
};

TrainResult train(const RunConfig& cfg, const Dataset& data, const TrainOptions& opt = {});

// Mean of the first and last `window` losses.
std::pair<double, double> smoothed_endpoints(const std::vector<TrainRecord>& log, int window);

struct EvalOptions {
    Coupling coupling = Coupling::semi;
    int max_episodes = 0;
    bool planning = true;
    bool latency = true;
};

// Occupancy forecasting with ground-truth actions, open-loop planning in the
// chosen coupling mode, and the copy-last-frame baseline (keys "baseline.*").
MetricReport evaluate(const WorldModel& model, const std::vector<SceneEpisode>& episodes, const SamplerConfig& sampler,
                      const EvalOptions& opt);

// Forecast keys for repeating the ground-truth frame-0 grid over the future.
MetricReport evaluate_copy_last(const std::vector<SceneEpisode>& episodes, const WorldConfig& world,
                                const std::string& prefix = "baseline.");

// Keys whose values are wall-clock measurements.
bool is_timing_key(const std::string& key);
MetricReport without_timing(const MetricReport& r);

std::filesystem::path run_directory(const RunConfig& cfg);
void write_report_files(const MetricReport& r, const std::filesystem::path& dir, const RunConfig& cfg);
MetricReport read_metrics(const std::filesystem::path& file);
std::vector<TrainRecord> read_train_log(const std::filesystem::path& file);

struct AblationAxis {
    std::string key;
    std::vector<nlohmann::json> values;
};

struct AblationSpec {
    std::string name = "ablation";
    nlohmann::json base = nlohmann::json::object();  // overrides applied to every cell
    std::vector<AblationAxis> axes;
    std::vector<std::uint64_t> seeds{0};
};

// {"name": ..., "base": {"model.dim": 32, ...}, "axes": {"model.mode": [...]},
//  "seeds": [0, 1, 2]}
AblationSpec parse_ablation(const nlohmann::json& j);

struct AblationCell {
    std::string label;
    std::uint64_t seed = 0;
    RunConfig config;
    MetricReport report;
    std::uint64_t dataset_hash = 0;
    double first_loss = 0.0;
    double last_loss = 0.0;
};

// Runs every (axis values x seed) cell. All cells share the data seed of
// `base_config`, so cells with equal world settings train on identical data.
std::vector<AblationCell> run_ablation(const AblationSpec& spec, const nlohmann::json& base_config,
                                       const std::function<void(const std::string&)>& progress = {});

// Markdown table, one row per cell plus per-setting means over seeds.
std::string ablation_table(const std::vector<AblationCell>& cells, const std::vector<std::string>& keys);
std::vector<std::string> default_table_keys(const WorldConfig& world);

// Writes report.md and loss.svg for a run directory.
void make_report(const std::filesystem::path& run_dir);
std::string loss_svg(const std::vector<TrainRecord>& log);

}  // namespace rw
