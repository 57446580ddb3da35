#pragma once

// Versioned binary checkpoints.
//
// Layout (little-endian):
//   magic "RWCKPT01" | u32 version | u64 config hash | u64 architecture hash
//   i64 step | u64 n + config JSON text
//   u64 parameter count, then per parameter:
//     u32 n + name | u32 rank | u32 dims... | f64 values...
//   u8 has_optimizer, then (if set) i64 optimizer step and for each parameter
//   the first and second moments as f64 arrays of the parameter's size.

#include "config.hpp"
#include "model.hpp"

#include <filesystem>
#include <memory>

namespace rw {

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    RunConfig config;
    std::uint64_t config_hash = 0;
    std::uint64_t arch_hash = 0;
    std::int64_t step = 0;
    std::unique_ptr<WorldModel> model;
    bool has_optimizer = false;
    std::int64_t optimizer_steps = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

void save_checkpoint(const std::filesystem::path& file, const RunConfig& cfg, const WorldModel& model,
                     const AdamW* optimizer, std::int64_t step);
Checkpoint load_checkpoint(const std::filesystem::path& file);

// Restores optimizer moments saved in a checkpoint.
void restore_optimizer(const Checkpoint& ckpt, AdamW& optimizer);

// Fails with ErrorCode::config when the checkpoint's parameter shapes were
// produced by a different architecture than `cfg` describes.
void require_compatible(const Checkpoint& ckpt, const RunConfig& cfg);

}  // namespace rw
