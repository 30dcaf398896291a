#include "scenepipe/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

#include "scenepipe/core/errors.hpp"

namespace scenepipe::core {

namespace fs = std::filesystem;

ImageTensor ImageTensor::from_tensor(const torch::Tensor& t, double tolerance) {
  if (!t.defined()) throw ShapeError("image tensor is undefined");
  torch::Tensor data = t.detach();
  if (data.dim() == 4 && data.size(0) == 1) data = data.squeeze(0);
  if (data.dim() != 3) throw ShapeError("image tensor must be 3xHxW, got " + std::to_string(data.dim()) + " dims");
  if (data.size(0) != 3) throw ChannelError("image tensor must have 3 channels, got " + std::to_string(data.size(0)));
  if (data.size(1) < 1 || data.size(2) < 1) throw ShapeError("image tensor has an empty spatial extent");
  data = data.to(torch::kFloat32).contiguous();
  if (!torch::isfinite(data).all().item<bool>()) throw NumericError("image tensor contains non-finite values");
  const double lo = data.min().item<double>();
  const double hi = data.max().item<double>();
  if (lo < -1.0 - tolerance || hi > 1.0 + tolerance) {
    throw ArgumentError("image values must lie in [-1,1], got [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return ImageTensor(data.clamp(-1.0, 1.0).clone());
}

bool ImageTensor::operator==(const ImageTensor& other) const {
  if (empty() || other.empty()) return empty() == other.empty();
  return data_.sizes() == other.data_.sizes() && torch::equal(data_, other.data_);
}

uint8_t unit_to_byte(float v) {
  const float scaled = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

ImageTensor load_image(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DecodeError("cannot decode '" + path.string() + "': " + image.message);
  }
  if ((image.format & PNG_FORMAT_FLAG_COLOR) == 0) {
    png_image_free(&image);
    throw ChannelError("'" + path.string() + "' is not an RGB image");
  }
  // read with alpha so libpng does not composite; the alpha channel is dropped
  image.format = PNG_FORMAT_RGBA;
  const int64_t h = image.height;
  const int64_t w = image.width;
  std::vector<uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("cannot decode '" + path.string() + "': " + msg);
  }

  auto out = torch::empty({3, h, w}, torch::kFloat32);
  auto acc = out.accessor<float, 3>();
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const uint8_t* px = pixels.data() + (y * w + x) * 4;
      for (int64_t c = 0; c < 3; ++c) acc[c][y][x] = byte_to_unit(px[c]);
    }
  }
  return ImageTensor::from_tensor(out);
}

ImageTensor load_image(const fs::path& path, int64_t resolution) {
  if (resolution < 1) throw ArgumentError("resolution must be positive");
  ImageTensor img = load_image(path);
  if (img.height() == resolution && img.width() == resolution) return img;
  return resize(img, resolution, resolution);
}

ImageTensor resize(const ImageTensor& img, int64_t height, int64_t width) {
  namespace F = torch::nn::functional;
  auto out = F::interpolate(img.batched(), F::InterpolateFuncOptions()
                                               .size(std::vector<int64_t>{height, width})
                                               .mode(torch::kBilinear)
                                               .align_corners(false));
  return ImageTensor::from_tensor(out.clamp(-1.0, 1.0));
}

void save_image(const ImageTensor& img, const fs::path& path) {
  if (img.empty()) throw ArgumentError("cannot save an empty image");
  const int64_t h = img.height();
  const int64_t w = img.width();
  auto acc = img.tensor().accessor<float, 3>();
  std::vector<uint8_t> pixels(static_cast<size_t>(h * w * 3));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < 3; ++c) pixels[(y * w + x) * 3 + c] = unit_to_byte(acc[c][y][x]);
    }
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw PersistenceError("cannot write '" + path.string() + "': " + msg);
  }
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw PersistenceError("not a directory: '" + dir.string() + "'");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace scenepipe::core
