#pragma once

// A run configuration small enough to train and evaluate in well under a
// second.

#include "config.hpp"

#include <filesystem>

namespace rw::testing {

inline nlohmann::json small_run_json()
{
    nlohmann::json j = config_to_json(RunConfig{});
    j["world"]["bev_h"] = 16;
    j["world"]["bev_w"] = 16;
    j["world"]["z_bins"] = 2;
    j["world"]["h_past"] = 1;
    j["world"]["f_future"] = 2;
    j["model"]["dim"] = 8;
    j["model"]["layers"] = 1;
    j["model"]["heads"] = 2;
    j["model"]["points"] = 2;
    j["model"]["memory"] = 2;
    j["train"]["steps"] = 3;
    j["train"]["batch_size"] = 2;
    j["optim"]["lr"] = 1e-3;
    j["data"]["train_episodes"] = 6;
    j["data"]["eval_episodes"] = 3;
    j["eval"]["latency_repeats"] = 2;
    return j;
}

inline RunConfig small_run() { return config_from_json(small_run_json()); }

inline std::filesystem::path fresh_dir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("resworld_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace rw::testing
