#pragma once

// Train/eval splits of generated episodes, in memory or on disk.
//
// On-disk layout: <dir>/dataset.txt (manifest) plus <dir>/<split>/ep_NNNNN
// episode directories.

#include "config.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace rw {

struct Dataset {
    std::vector<SceneEpisode> train;
    std::vector<SceneEpisode> eval;
    std::uint64_t hash = 0;
};

// Episode seed for index i of a split ("train" or "eval").
std::uint64_t episode_seed(std::uint64_t data_seed, const std::string& split, int index);

std::vector<SceneEpisode> generate_split(const RunConfig& cfg, const std::string& split, int count);
std::uint64_t dataset_hash(const Dataset& d);

// Generates both splits from the config's data seed.
Dataset generate_dataset(const RunConfig& cfg);

// Writes the dataset under dir and returns its hash.
std::uint64_t write_dataset(const Dataset& d, const RunConfig& cfg, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir, const RunConfig& cfg);

// Loads cfg.data.dir when set and present, otherwise generates in memory.
Dataset obtain_dataset(const RunConfig& cfg);

// Runs fn(i) for i in [0, n) across hardware threads. Callers write results
// by index so the outcome does not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace rw
