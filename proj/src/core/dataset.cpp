#include "dataset.hpp"

#include "episode_io.hpp"
#include "error.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace rw {

namespace fs = std::filesystem;

std::uint64_t episode_seed(std::uint64_t data_seed, const std::string& split, int index)
{
    return Rng::substream(data_seed, "data." + split, static_cast<std::uint64_t>(index)).next();
}

void parallel_for(int n, const std::function<void(int)>& fn)
{
    const int threads = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::max(n, 1));
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::vector<SceneEpisode> generate_split(const RunConfig& cfg, const std::string& split, int count)
{
    std::vector<SceneEpisode> out(static_cast<std::size_t>(count));
    const std::uint64_t seed = data_seed(cfg);
    parallel_for(count, [&](int i) {
        out[static_cast<std::size_t>(i)] = generate_episode(episode_seed(seed, split, i), cfg.world, cfg.generator);
    });
    return out;
}

std::uint64_t dataset_hash(const Dataset& d)
{
    std::uint64_t h = fnv1a("dataset");
    for (const auto* split : {&d.train, &d.eval}) {
        h = fnv1a(std::to_string(split->size()), h);
        for (const auto& ep : *split) h = fnv1a(hex64(episode_hash(ep)), h);
    }
    return h;
}

Dataset generate_dataset(const RunConfig& cfg)
{
    Dataset d;
    d.train = generate_split(cfg, "train", cfg.data.train_episodes);
    d.eval = generate_split(cfg, "eval", cfg.data.eval_episodes);
    d.hash = dataset_hash(d);
    return d;
}

namespace {

fs::path episode_dir(const fs::path& root, const std::string& split, int i)
{
    char name[32];
    std::snprintf(name, sizeof name, "ep_%05d", i);
    return root / split / name;
}

std::string world_key(const RunConfig& cfg) { return config_to_json(cfg).at("world").dump(); }
std::string generator_key(const RunConfig& cfg) { return config_to_json(cfg).at("generator").dump(); }

}  // namespace

std::uint64_t write_dataset(const Dataset& d, const RunConfig& cfg, const fs::path& dir)
{
    fs::create_directories(dir);
    auto write_split = [&](const std::vector<SceneEpisode>& eps, const std::string& split) {
        parallel_for(static_cast<int>(eps.size()), [&](int i) {
            save_episode(eps[static_cast<std::size_t>(i)], episode_dir(dir, split, i));
        });
    };
    write_split(d.train, "train");
    write_split(d.eval, "eval");
    const std::uint64_t h = dataset_hash(d);
    Manifest m{
        {"format", "resworld-dataset"},
        {"format_version", "1"},
        {"data_seed", std::to_string(data_seed(cfg))},
        {"train_episodes", std::to_string(d.train.size())},
        {"eval_episodes", std::to_string(d.eval.size())},
        {"world", world_key(cfg)},
        {"generator", generator_key(cfg)},
        {"hash", hex64(h)},
    };
    write_manifest(m, dir / "dataset.txt");
    return h;
}

Dataset read_dataset(const fs::path& dir, const RunConfig& cfg)
{
    const Manifest m = read_manifest(dir / "dataset.txt");
    auto field = [&](const std::string& key) {
        const auto it = m.find(key);
        check(it != m.end(), ErrorCode::malformed_file, "dataset manifest lacks '" + key + "'");
        return it->second;
    };
    check(field("format") == "resworld-dataset", ErrorCode::malformed_file, dir.string() + " is not a dataset");
    check(field("format_version") == "1", ErrorCode::format_version,
          "dataset format version " + field("format_version") + " is not supported");
    check(field("world") == world_key(cfg), ErrorCode::config,
          "dataset at " + dir.string() + " was generated for a different world config");
    check(field("generator") == generator_key(cfg) && field("data_seed") == std::to_string(data_seed(cfg)),
          ErrorCode::config, "dataset at " + dir.string() + " was generated with different generator settings or seed");
    const int n_train = std::stoi(field("train_episodes"));
    const int n_eval = std::stoi(field("eval_episodes"));
    check(n_train >= cfg.data.train_episodes && n_eval >= cfg.data.eval_episodes, ErrorCode::config,
          "dataset at " + dir.string() + " holds fewer episodes than configured");

    Dataset d;
    d.train.resize(static_cast<std::size_t>(cfg.data.train_episodes));
    d.eval.resize(static_cast<std::size_t>(cfg.data.eval_episodes));
    parallel_for(cfg.data.train_episodes,
                 [&](int i) { d.train[static_cast<std::size_t>(i)] = load_episode(episode_dir(dir, "train", i)); });
    parallel_for(cfg.data.eval_episodes,
                 [&](int i) { d.eval[static_cast<std::size_t>(i)] = load_episode(episode_dir(dir, "eval", i)); });
    d.hash = dataset_hash(d);
    return d;
}

Dataset obtain_dataset(const RunConfig& cfg)
{
    if (!cfg.data.dir.empty() && fs::exists(fs::path(cfg.data.dir) / "dataset.txt"))
        return read_dataset(cfg.data.dir, cfg);
    return generate_dataset(cfg);
}

}  // namespace rw
