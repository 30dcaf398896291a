#include "scenepipe/core/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "scenepipe/core/errors.hpp"

namespace scenepipe::core {

namespace fs = std::filesystem;

namespace {

double parse_double(const std::string& name, const std::string& text) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError("config field '" + name + "' expects a number, got '" + text + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& name, const std::string& text) {
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("config field '" + name + "' expects an integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& name, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config field '" + name + "' expects a boolean, got '" + text + "'");
}

}  // namespace

void TrainConfig::validate() const {
  auto check = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(std::string("config field '") + field + "' " + what);
  };
  for (auto [name, value] : {std::pair{"lambda_lpips", lambda_lpips}, {"lambda_global", lambda_global},
                             {"lambda_patch", lambda_patch}, {"lambda_style", lambda_style},
                             {"lambda_src", lambda_src}, {"lambda_hdce", lambda_hdce},
                             {"lambda_content", lambda_content}, {"r1_gamma", r1_gamma}}) {
    check(value >= 0.0 && std::isfinite(value), name, "must be a finite value >= 0");
  }
  check(truncation > 0.0 && truncation <= 1.0, "truncation", "must lie in (0,1]");
  check(resolution >= 4 && resolution % 4 == 0, "resolution", "must be a positive multiple of 4");
  check(finetune_iters >= 0, "finetune_iters", "must be >= 0");
  check(finetune_batch_size >= 1, "finetune_batch_size", "must be >= 1");
  check(patch_count_finetune >= 2, "patch_count_finetune", "must be >= 2");
  check(patch_size_finetune >= 1, "patch_size_finetune", "must be >= 1");
  check(finetune_lr > 0.0, "finetune_lr", "must be > 0");
  check(style_dim >= 1, "style_dim", "must be >= 1");
  check(style_blocks >= 1, "style_blocks", "must be >= 1");
  check(mapping_layers >= 1, "mapping_layers", "must be >= 1");
  check(style_channel_cap >= 1, "style_channel_cap", "must be >= 1");
  check(trainable_blocks >= 1 && trainable_blocks <= style_blocks, "trainable_blocks", "must lie in [1, style_blocks]");
  check(frozen_style_blocks >= 0 && frozen_style_blocks <= style_blocks, "frozen_style_blocks",
        "must lie in [0, style_blocks]");
  check(w_avg_samples >= 1, "w_avg_samples", "must be >= 1");
  check(n_pairs >= 0, "n_pairs", "must be >= 0");
  check(first_pair_seed >= 0 && first_pair_seed + n_pairs <= 100000000, "first_pair_seed",
        "must keep pair seeds within 8 decimal digits");
  check(bce_threshold >= 0.0, "bce_threshold", "must be >= 0");
  check(nce_temperature > 0.0, "nce_temperature", "must be > 0");
  check(std::isfinite(hdce_beta), "hdce_beta", "must be finite");
  check(epochs >= 1, "epochs", "must be >= 1");
  check(batch_size == 1, "batch_size", "only batch size 1 is supported");
  check(patches_per_layer >= 2, "patches_per_layer", "must be >= 2");
  check(!feature_layer_ids.empty(), "feature_layer_ids", "must not be empty");
  for (size_t i = 0; i < feature_layer_ids.size(); ++i) {
    check(feature_layer_ids[i] >= 0, "feature_layer_ids", "must be non-negative");
    if (i > 0) check(feature_layer_ids[i] > feature_layer_ids[i - 1], "feature_layer_ids", "must be strictly increasing");
  }
  check(embed_dim >= 1, "embed_dim", "must be >= 1");
  check(ngf >= 1 && ndf >= 1, "ngf", "and ndf must be >= 1");
  check(n_res_blocks >= 1, "n_res_blocks", "must be >= 1");
  check(lr > 0.0, "lr", "must be > 0");
  check(sup_schedule == "cosine" || sup_schedule == "constant" || sup_schedule == "zero", "sup_schedule",
        "must be one of cosine|constant|zero");
  check(style_variant == "stylepatchnce" || style_variant == "l1", "style_variant", "must be stylepatchnce|l1");
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  TrainConfig::visit(cfg, [&](const char* name, const auto& value) { j[name] = value; });
  return j;
}

TrainConfig from_json(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::set<std::string> known;
  TrainConfig::visit(base, [&](const char* name, auto& value) {
    known.insert(name);
    auto it = j.find(name);
    if (it == j.end()) return;
    using T = std::decay_t<decltype(value)>;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ConfigError("expects a number");
        value = it->template get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expects a boolean");
        value = it->template get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("expects a string");
        value = it->template get<std::string>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("expects an integer");
        value = it->template get<T>();
      } else {
        if (!it->is_array()) throw ConfigError("expects a list of integers");
        value = it->template get<T>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config field '") + name + "': " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config field '") + name + "' " + e.what());
    }
  });
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  return base;
}

std::string serialize_config(const TrainConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return from_json(j, std::move(base));
}

TrainConfig load_config(const fs::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void save_config(const TrainConfig& cfg, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw PersistenceError("cannot write config file '" + path.string() + "'");
  out << serialize_config(cfg);
}

void set_config_field(TrainConfig& cfg, const std::string& field, const std::string& text) {
  bool found = false;
  TrainConfig::visit(cfg, [&](const char* name, auto& value) {
    if (field != name) return;
    found = true;
    using T = std::decay_t<decltype(value)>;
    if constexpr (std::is_same_v<T, double>) {
      value = parse_double(name, text);
    } else if constexpr (std::is_same_v<T, bool>) {
      value = parse_bool(name, text);
    } else if constexpr (std::is_same_v<T, std::string>) {
      value = text;
    } else if constexpr (std::is_integral_v<T>) {
      value = parse_int<T>(name, text);
    } else {
      T items;
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, ',')) items.push_back(parse_int<int64_t>(name, tok));
      value = std::move(items);
    }
  });
  if (!found) throw ConfigError("unknown config field '" + field + "'");
}

std::vector<std::string> config_field_names() {
  std::vector<std::string> names;
  TrainConfig cfg;
  TrainConfig::visit(cfg, [&](const char* name, const auto&) { names.emplace_back(name); });
  return names;
}

}  // namespace scenepipe::core
