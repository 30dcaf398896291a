#include "scenepipe/core/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "scenepipe/core/errors.hpp"

namespace scenepipe::core {

namespace fs = std::filesystem;

namespace {

std::string seed_stem(int64_t seed) {
  if (seed < 0 || seed > 99999999) throw ArgumentError("pair seed out of range: " + std::to_string(seed));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08lld", static_cast<long long>(seed));
  return buf;
}

}  // namespace

fs::path pairs_dir(const fs::path& root) { return root / "pairs"; }
fs::path real_path(const fs::path& root, int64_t seed) { return pairs_dir(root) / (seed_stem(seed) + "_real.png"); }
fs::path anime_path(const fs::path& root, int64_t seed) { return pairs_dir(root) / (seed_stem(seed) + "_anime.png"); }
fs::path manifest_path(const fs::path& root) { return root / "manifest.jsonl"; }

std::string format_manifest_line(const ManifestRecord& rec) {
  nlohmann::ordered_json j;
  j["seed"] = rec.seed;
  j["real"] = "pairs/" + seed_stem(rec.seed) + "_real.png";
  j["anime"] = "pairs/" + seed_stem(rec.seed) + "_anime.png";
  j["bce_score"] = rec.bce_score ? nlohmann::ordered_json(*rec.bce_score) : nlohmann::ordered_json(nullptr);
  j["categories"] = rec.category_count ? nlohmann::ordered_json(*rec.category_count) : nlohmann::ordered_json(nullptr);
  j["kept"] = rec.kept ? nlohmann::ordered_json(*rec.kept) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

ManifestRecord parse_manifest_line(const std::string& line) {
  ManifestRecord rec;
  try {
    auto j = nlohmann::json::parse(line);
    rec.seed = j.at("seed").get<int64_t>();
    if (j.contains("bce_score") && !j["bce_score"].is_null()) rec.bce_score = j["bce_score"].get<double>();
    if (j.contains("categories") && !j["categories"].is_null()) rec.category_count = j["categories"].get<int64_t>();
    if (j.contains("kept") && !j["kept"].is_null()) rec.kept = j["kept"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError(std::string("malformed manifest line: ") + e.what());
  }
  return rec;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write manifest '" + path.string() + "'");
    for (const auto& rec : manifest) out << format_manifest_line(rec) << '\n';
    if (!out) throw PersistenceError("failed writing manifest '" + path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw PersistenceError("cannot replace manifest '" + path.string() + "': " + ec.message());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot read manifest '" + path.string() + "'");
  Manifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    manifest.push_back(parse_manifest_line(line));
  }
  return manifest;
}

void save_pair(const PseudoPair& pair, const fs::path& root) {
  fs::create_directories(pairs_dir(root));
  save_image(pair.x_p, real_path(root, pair.seed));
  save_image(pair.y_p, anime_path(root, pair.seed));
}

PseudoPair load_pair(const fs::path& root, const ManifestRecord& rec) {
  const auto rp = real_path(root, rec.seed);
  const auto ap = anime_path(root, rec.seed);
  if (!fs::exists(rp) || !fs::exists(ap)) {
    throw PersistenceError("missing images for pair seed " + std::to_string(rec.seed) + " under '" + root.string() + "'");
  }
  PseudoPair pair{load_image(rp), load_image(ap), rec.seed, rec.bce_score};
  if (pair.x_p.height() != pair.y_p.height() || pair.x_p.width() != pair.y_p.width()) {
    throw ShapeError("pair " + std::to_string(rec.seed) + " members differ in resolution");
  }
  return pair;
}

std::vector<PseudoPair> load_pairs(const fs::path& root, bool kept_only) {
  std::vector<PseudoPair> pairs;
  for (const auto& rec : read_manifest(manifest_path(root))) {
    if (kept_only && !rec.kept.value_or(false)) continue;
    pairs.push_back(load_pair(root, rec));
  }
  return pairs;
}

}  // namespace scenepipe::core
