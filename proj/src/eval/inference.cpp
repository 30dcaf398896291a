#include "scenepipe/eval/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "scenepipe/core/errors.hpp"
#include "scenepipe/i2i/trainer.hpp"

namespace scenepipe::eval {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

core::ImageTensor translate_any_size(i2i::TranslationGenerator& g, const core::ImageTensor& x) {
  const int64_t h = x.height();
  const int64_t w = x.width();
  // at least 8 so the bottleneck stays 2x2 for the reflection pads
  const int64_t ph = std::max<int64_t>(8, (h + 3) / 4 * 4) - h;
  const int64_t pw = std::max<int64_t>(8, (w + 3) / 4 * 4) - w;
  torch::NoGradGuard no_grad;
  torch::Tensor in = x.batched();
  if (ph > 0 || pw > 0) in = F::pad(in, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReplicate));
  torch::Tensor out = g->forward(in);
  out = out.index({0, torch::indexing::Slice(), torch::indexing::Slice(0, h), torch::indexing::Slice(0, w)});
  return core::ImageTensor::from_tensor(out);
}

InferenceResult infer_batch(i2i::TranslationGenerator& g, const fs::path& in_dir, const fs::path& out_dir,
                            std::optional<int64_t> resolution) {
  if (resolution && *resolution < 4) throw ArgumentError("inference resolution must be >= 4");
  g->eval();
  InferenceResult result;
  const auto inputs = core::list_images(in_dir);
  for (const auto& path : inputs) {
    core::ImageTensor img;
    try {
      img = core::load_image(path);
    } catch (const DecodeError& e) {
      std::cerr << "skip " << path.string() << ": " << e.what() << "\n";
      result.failed.push_back(path.filename().string());
      continue;
    } catch (const ChannelError& e) {
      std::cerr << "skip " << path.string() << ": " << e.what() << "\n";
      result.failed.push_back(path.filename().string());
      continue;
    }
    if (resolution) {
      const double scale = static_cast<double>(*resolution) / static_cast<double>(std::min(img.height(), img.width()));
      img = core::resize(img, std::max<int64_t>(1, std::lround(img.height() * scale)),
                         std::max<int64_t>(1, std::lround(img.width() * scale)));
    }
    core::save_image(translate_any_size(g, img), out_dir / path.filename());
    ++result.translated;
  }
  if (!inputs.empty() && result.translated == 0) {
    throw DecodeError("none of the " + std::to_string(inputs.size()) + " inputs in " + in_dir.string() +
                      " could be decoded");
  }
  return result;
}

InferenceResult infer_batch(const fs::path& checkpoint, const fs::path& in_dir, const fs::path& out_dir,
                            std::optional<int64_t> resolution) {
  i2i::TranslationGenerator g = i2i::load_translator(checkpoint);
  return infer_batch(g, in_dir, out_dir, resolution);
}

}  // namespace scenepipe::eval
