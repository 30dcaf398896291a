#pragma once

#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace scenepipe::core {

// A 3xHxW float image with values in [-1,1]. Immutable once constructed; the
// wrapped tensor is never handed out mutably.
class ImageTensor {
 public:
  ImageTensor() = default;

  // Validates shape (3xHxW or 1x3xHxW), finiteness and range. Values outside
  // [-1,1] by more than `tolerance` are rejected; smaller excursions are clamped.
  static ImageTensor from_tensor(const torch::Tensor& t, double tolerance = 1e-6);

  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }
  bool empty() const { return !data_.defined(); }

  // 3xHxW, float32, contiguous.
  const torch::Tensor& tensor() const { return data_; }
  // 1x3xHxW view for network consumption.
  torch::Tensor batched() const { return data_.unsqueeze(0); }

  bool operator==(const ImageTensor& other) const;

 private:
  explicit ImageTensor(torch::Tensor t) : data_(std::move(t)) {}
  torch::Tensor data_;
};

// Decodes an RGB(A) PNG at its native size.
ImageTensor load_image(const std::filesystem::path& path);
// Decodes and bilinearly resizes to resolution x resolution.
ImageTensor load_image(const std::filesystem::path& path, int64_t resolution);

void save_image(const ImageTensor& img, const std::filesystem::path& path);

// Bilinear resize (align_corners = false).
ImageTensor resize(const ImageTensor& img, int64_t height, int64_t width);

// 8-bit <-> [-1,1] mapping used by load/save.
inline float byte_to_unit(uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }
uint8_t unit_to_byte(float v);

// Sorted list of *.png files directly inside `dir`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace scenepipe::core
