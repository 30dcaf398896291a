#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace scenepipe::core {

inline constexpr int64_t kCheckpointVersion = 1;

// Versioned container shared by every stage: a torch archive carrying a
// format tag, version, payload kind and a JSON architecture header, followed
// by named modules, optimizers and scalars.
class CheckpointWriter {
 public:
  CheckpointWriter(std::string kind, const nlohmann::json& architecture);

  void add_module(const std::string& name, const torch::nn::Module& module);
  void add_optimizer(const std::string& name, const torch::optim::Optimizer& optimizer);
  void add_int(const std::string& name, int64_t value);
  void add_string(const std::string& name, const std::string& value);

  // Writes atomically (temp file + rename).
  void save(const std::filesystem::path& path);

 private:
  torch::serialize::OutputArchive archive_;
};

// Any malformed, truncated or mismatched file surfaces as CheckpointError.
class CheckpointReader {
 public:
  CheckpointReader(const std::filesystem::path& path, const std::string& expected_kind);

  const nlohmann::json& architecture() const { return architecture_; }
  void load_module(const std::string& name, torch::nn::Module& module);
  void load_optimizer(const std::string& name, torch::optim::Optimizer& optimizer);
  int64_t get_int(const std::string& name);
  std::string get_string(const std::string& name);

 private:
  std::string path_;
  torch::serialize::InputArchive archive_;
  nlohmann::json architecture_;
};

// Copies parameters and buffers between two modules of identical structure.
void copy_module_state(const torch::nn::Module& from, torch::nn::Module& to);

}  // namespace scenepipe::core
