#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scenepipe/core/image.hpp"
#include "scenepipe/i2i/networks.hpp"

namespace scenepipe::eval {

// Translate one image of any size: edge-pad to a multiple of 4, run G, crop back.
core::ImageTensor translate_any_size(i2i::TranslationGenerator& g, const core::ImageTensor& x);

struct InferenceResult {
  int64_t translated = 0;
  std::vector<std::string> failed;
};

// Translates every PNG in in_dir (filename order) into out_dir under the same
// name. With a resolution, the shorter side is scaled to it first. Undecodable
// files are logged and skipped; if every file fails, throws DecodeError.
InferenceResult infer_batch(i2i::TranslationGenerator& g, const std::filesystem::path& in_dir,
                            const std::filesystem::path& out_dir, std::optional<int64_t> resolution = std::nullopt);
InferenceResult infer_batch(const std::filesystem::path& checkpoint, const std::filesystem::path& in_dir,
                            const std::filesystem::path& out_dir, std::optional<int64_t> resolution = std::nullopt);

}  // namespace scenepipe::eval
