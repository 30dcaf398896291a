#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scenepipe/core/image.hpp"

namespace scenepipe::core {

// A (real-like, anime-like) image pair synthesized from one latent code.
struct PseudoPair {
  ImageTensor x_p;
  ImageTensor y_p;
  int64_t seed = 0;
  std::optional<double> bce_score;
};

// One manifest line. `kept` is unset until the pair has been through selection.
struct ManifestRecord {
  int64_t seed = 0;
  std::optional<double> bce_score;
  std::optional<int64_t> category_count;
  std::optional<bool> kept;

  bool operator==(const ManifestRecord&) const = default;
};

using Manifest = std::vector<ManifestRecord>;

// On-disk layout of a pseudo-pair dataset rooted at `root`:
//   root/pairs/{seed:08d}_real.png
//   root/pairs/{seed:08d}_anime.png
//   root/manifest.jsonl
std::filesystem::path pairs_dir(const std::filesystem::path& root);
std::filesystem::path real_path(const std::filesystem::path& root, int64_t seed);
std::filesystem::path anime_path(const std::filesystem::path& root, int64_t seed);
std::filesystem::path manifest_path(const std::filesystem::path& root);

std::string format_manifest_line(const ManifestRecord& rec);
ManifestRecord parse_manifest_line(const std::string& line);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

void save_pair(const PseudoPair& pair, const std::filesystem::path& root);
PseudoPair load_pair(const std::filesystem::path& root, const ManifestRecord& rec);

// Loads every pair the manifest marks as kept (or every pair, when
// `kept_only` is false).
std::vector<PseudoPair> load_pairs(const std::filesystem::path& root, bool kept_only = true);

}  // namespace scenepipe::core
