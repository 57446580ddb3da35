#pragma once

// Episode directory format (version 1):
//
//   manifest.txt      UTF-8 "key = value" lines; '#' starts a comment
//   occ.bin           u8,  shape (frames, bev_h, bev_w, z_bins)
//   ego.bin           f64, shape (frames, 2)
//   commands.bin      u8,  shape (f_future)
//   observations.bin  f64, shape (h_past + 1, bev_h, bev_w, num_classes + 1)
//
// Arrays are flat, row-major and little-endian. Each array is declared in the
// manifest as "array.<name> = <dtype> <d0,d1,...> <file>".

#include "gridworld.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace rw {

constexpr int kEpisodeFormatVersion = 1;

void save_episode(const SceneEpisode& episode, const std::filesystem::path& dir);
SceneEpisode load_episode(const std::filesystem::path& dir);

// Shared key-value manifest helpers.
using Manifest = std::map<std::string, std::string>;
Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const Manifest& m, const std::filesystem::path& file);

// Stable 64-bit content hash of an episode's stored arrays.
std::uint64_t episode_hash(const SceneEpisode& episode);

}  // namespace rw
