#include "scenepipe/core/checkpoint.hpp"

#include "scenepipe/core/errors.hpp"

namespace scenepipe::core {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatTag = "scenepipe-checkpoint";

}  // namespace

CheckpointWriter::CheckpointWriter(std::string kind, const nlohmann::json& architecture) {
  archive_.write("meta/format", c10::IValue(std::string(kFormatTag)));
  archive_.write("meta/version", c10::IValue(kCheckpointVersion));
  archive_.write("meta/kind", c10::IValue(std::move(kind)));
  archive_.write("meta/architecture", c10::IValue(architecture.dump()));
}

void CheckpointWriter::add_module(const std::string& name, const torch::nn::Module& module) {
  torch::serialize::OutputArchive sub;
  module.save(sub);
  archive_.write("module/" + name, sub);
}

void CheckpointWriter::add_optimizer(const std::string& name, const torch::optim::Optimizer& optimizer) {
  torch::serialize::OutputArchive sub;
  optimizer.save(sub);
  archive_.write("optim/" + name, sub);
}

void CheckpointWriter::add_int(const std::string& name, int64_t value) {
  archive_.write("int/" + name, c10::IValue(value));
}

void CheckpointWriter::add_string(const std::string& name, const std::string& value) {
  archive_.write("str/" + name, c10::IValue(value));
}

void CheckpointWriter::save(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  try {
    archive_.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw PersistenceError("cannot write checkpoint '" + path.string() + "': " + e.what_without_backtrace());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw PersistenceError("cannot move checkpoint into place: " + ec.message());
}

CheckpointReader::CheckpointReader(const fs::path& path, const std::string& expected_kind) : path_(path.string()) {
  if (!fs::exists(path)) throw CheckpointError("checkpoint not found: '" + path_ + "'");
  try {
    archive_.load_from(path_);
    c10::IValue format, version, kind, arch;
    if (!archive_.try_read("meta/format", format) || !format.isString() || format.toStringRef() != kFormatTag) {
      throw CheckpointError("'" + path_ + "' is not a scenepipe checkpoint");
    }
    if (!archive_.try_read("meta/version", version) || !version.isInt()) {
      throw CheckpointError("'" + path_ + "' has no version header");
    }
    if (version.toInt() != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version.toInt()) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    if (!archive_.try_read("meta/kind", kind) || !kind.isString() || kind.toStringRef() != expected_kind) {
      throw CheckpointError("'" + path_ + "' does not hold a " + expected_kind);
    }
    if (!archive_.try_read("meta/architecture", arch) || !arch.isString()) {
      throw CheckpointError("'" + path_ + "' has no architecture header");
    }
    architecture_ = nlohmann::json::parse(arch.toStringRef());
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot read checkpoint '" + path_ + "': " + e.what_without_backtrace());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt architecture header in '" + path_ + "': " + e.what());
  }
}

void CheckpointReader::load_module(const std::string& name, torch::nn::Module& module) {
  try {
    torch::serialize::InputArchive sub;
    if (!archive_.try_read("module/" + name, sub)) throw CheckpointError("checkpoint lacks module '" + name + "'");
    module.load(sub);
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot restore module '" + name + "' from '" + path_ + "': " + e.what_without_backtrace());
  }
}

void CheckpointReader::load_optimizer(const std::string& name, torch::optim::Optimizer& optimizer) {
  try {
    torch::serialize::InputArchive sub;
    if (!archive_.try_read("optim/" + name, sub)) throw CheckpointError("checkpoint lacks optimizer '" + name + "'");
    optimizer.load(sub);
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot restore optimizer '" + name + "' from '" + path_ + "': " + e.what_without_backtrace());
  }
}

int64_t CheckpointReader::get_int(const std::string& name) {
  c10::IValue v;
  try {
    if (!archive_.try_read("int/" + name, v) || !v.isInt()) throw CheckpointError("checkpoint lacks integer '" + name + "'");
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot read '" + name + "': " + e.what_without_backtrace());
  }
  return v.toInt();
}

std::string CheckpointReader::get_string(const std::string& name) {
  c10::IValue v;
  try {
    if (!archive_.try_read("str/" + name, v) || !v.isString()) throw CheckpointError("checkpoint lacks string '" + name + "'");
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot read '" + name + "': " + e.what_without_backtrace());
  }
  return v.toStringRef();
}

void copy_module_state(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard no_grad;
  const auto src_params = from.named_parameters(true);
  auto dst_params = to.named_parameters(true);
  if (src_params.size() != dst_params.size()) throw ShapeError("copy_module_state: parameter sets differ");
  for (const auto& item : src_params) {
    auto* dst = dst_params.find(item.key());
    if (dst == nullptr || dst->sizes() != item.value().sizes()) {
      throw ShapeError("copy_module_state: mismatch at '" + item.key() + "'");
    }
    dst->copy_(item.value());
  }
  const auto src_bufs = from.named_buffers(true);
  auto dst_bufs = to.named_buffers(true);
  for (const auto& item : src_bufs) {
    auto* dst = dst_bufs.find(item.key());
    if (dst == nullptr || dst->sizes() != item.value().sizes()) {
      throw ShapeError("copy_module_state: buffer mismatch at '" + item.key() + "'");
    }
    dst->copy_(item.value());
  }
}

}  // namespace scenepipe::core
