#pragma once

// Run configuration: JSON file plus dotted-key overrides. Every key of the
// input must exist in the default configuration; unknown keys are rejected.

#include "heads.hpp"
#include "objectives.hpp"
#include "optimizer.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace rw {

struct TrainConfig {
    int steps = 200;
    int batch_size = 4;
    double teacher_forcing_fraction = 0.5;  // leading share of steps fully teacher-forced
    int log_every = 1;
    bool operator==(const TrainConfig&) const = default;
};

struct DataConfig {
    int train_episodes = 500;
    int eval_episodes = 100;
    std::string dir;  // empty: generate in memory
    // Dataset seed; negative means the run seed. Ablation cells share one.
    std::int64_t seed = -1;
    bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
    int max_episodes = 0;  // 0: whole split
    int latency_repeats = 20;
    bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 0;
    WorldConfig world;
    GeneratorParams generator;
    ModelConfig model;
    LossWeights loss;
    AdamWConfig optim;
    TrainConfig train;
    Coupling coupling = Coupling::semi;
    SamplerConfig sampler;
    DataConfig data;
    EvalConfig eval;
    std::string output_root = "runs";
    std::string run_name;

    void validate() const;
};

// Seed from which the dataset substreams are derived.
std::uint64_t data_seed(const RunConfig& cfg);

nlohmann::json config_to_json(const RunConfig& cfg);
// Strict conversion: unknown keys and wrong types raise ErrorCode::config.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Applies "a.b.c=value" overrides. The value is parsed as JSON when
// possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);
// Sets a dotted key, creating intermediate sections.
void set_dotted(nlohmann::json& j, const std::string& key, nlohmann::json value);

// Hash of the keys that determine parameter shapes.
std::uint64_t architecture_hash(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);
std::string hex64(std::uint64_t v);

// Output root: RESWORLD_OUTPUT_ROOT when set, otherwise cfg.output_root.
std::string resolve_output_root(const RunConfig& cfg);

}  // namespace rw
