#include "scenepipe/cli/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "scenepipe/adapt/finetune.hpp"
#include "scenepipe/core/errors.hpp"
#include "scenepipe/core/image.hpp"
#include "scenepipe/eval/inference.hpp"
#include "scenepipe/eval/metrics.hpp"
#include "scenepipe/i2i/trainer.hpp"
#include "scenepipe/select/selection.hpp"

namespace scenepipe::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::string flag_name(std::string field) {
  for (auto& c : field) {
    if (c == '_') c = '-';
  }
  return "--" + field;
}

// Shared state of one invocation: config flags plus the per-command paths.
struct Invocation {
  std::string config_path;
  std::map<std::string, std::string> field_values;
  std::map<std::string, std::vector<CLI::Option*>> field_options;  // one per subcommand

  bool given(const std::string& field) const {
    for (const auto* opt : field_options.at(field)) {
      if (opt->count() > 0) return true;
    }
    return false;
  }
  std::map<std::string, std::string> paths;
  bool resume = false;
};

void add_config_flags(CLI::App& sub, Invocation& inv) {
  sub.add_option("--config", inv.config_path, "JSON config file (fallback: $SCENEPIPE_CONFIG)");
  for (const auto& field : core::config_field_names()) {
    std::string names = flag_name(field);
    if (field == "bce_threshold") names += ",--threshold";
    if (field == "fid_extractor") names += ",--extractor";
    inv.field_options[field].push_back(sub.add_option(names, inv.field_values[field], "config field " + field));
  }
}

CLI::Option* add_path(CLI::App& sub, Invocation& inv, const std::string& key, const std::string& help) {
  return sub.add_option("--" + key, inv.paths[key], help);
}

core::TrainConfig resolved(const Invocation& inv, std::ostream& err) {
  std::map<std::string, std::string> overrides;
  for (const auto& [field, opts] : inv.field_options) {
    if (inv.given(field)) overrides[field] = inv.field_values.at(field);
  }
  std::optional<fs::path> file;
  if (!inv.config_path.empty()) file = inv.config_path;
  core::TrainConfig cfg = resolve_config(file, overrides);
  err << "resolved config " << core::to_json(cfg).dump() << "\n";
  return cfg;
}

void write_config(const core::TrainConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  core::save_config(cfg, dir / "config.json");
}

std::vector<core::ImageTensor> load_dir(const fs::path& dir, int64_t resolution) {
  std::vector<core::ImageTensor> images;
  for (const auto& p : core::list_images(dir)) images.push_back(core::load_image(p, resolution));
  return images;
}

class JsonlWriter {
 public:
  JsonlWriter(const fs::path& path, bool append) : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw PersistenceError("cannot open " + path.string());
  }
  void write(const nlohmann::ordered_json& rec) { out_ << rec.dump() << "\n"; }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

int cmd_finetune_gen(const core::TrainConfig& cfg, const Invocation& inv, std::ostream& out) {
  const fs::path out_dir = inv.paths.at("out");
  write_config(cfg, out_dir);
  const auto options = adapt::StyleGeneratorOptions::from_config(cfg);
  const auto anime = load_dir(inv.paths.at("anime"), options.resolution());
  if (anime.empty()) throw ConfigError("no anime images in " + inv.paths.at("anime"));

  const core::Rng root(cfg.seed);
  core::Rng init_rng = root.fork("style-generator");
  auto [g_s, g_t] = adapt::make_generator_pair(options, init_rng, cfg.w_avg_samples);
  core::Rng d_rng = root.fork("style-discriminator");
  adapt::StyleDiscriminator disc(options, d_rng);
  adapt::StyleFinetuner tuner(g_s, g_t, disc, adapt::FreezePlan::from_config(cfg), cfg,
                              priors::make_embedder(cfg.embedder, cfg.embedder_weights),
                              priors::make_perceptual(cfg.perceptual, cfg.perceptual_weights));

  JsonlWriter metrics(out_dir / "finetune_metrics.jsonl", false);
  const auto n = static_cast<int64_t>(anime.size());
  for (int64_t step = 0; step < cfg.finetune_iters; ++step) {
    core::Rng step_rng = root.fork("finetune-step", {static_cast<uint64_t>(step)});
    std::vector<torch::Tensor> batch;
    for (int64_t b = 0; b < cfg.finetune_batch_size; ++b) batch.push_back(anime[step_rng.uniform_int(0, n - 1)].tensor());
    metrics.write(tuner.step(torch::stack(batch), step_rng).to_json());
  }
  metrics.flush();
  adapt::save_generator(tuner.source(), out_dir / "g_s.pt");
  adapt::save_generator(tuner.target(), out_dir / "g_t.pt");
  adapt::save_discriminator(tuner.discriminator(), options, out_dir / "d.pt");
  out << "fine-tuned " << cfg.finetune_iters << " steps -> " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_gen_pairs(const core::TrainConfig& cfg, const Invocation& inv, std::ostream& out) {
  const fs::path gen_dir = inv.paths.at("generators");
  const fs::path out_dir = inv.paths.at("out");
  write_config(cfg, out_dir);
  adapt::StyleGenerator g_s = adapt::load_generator(gen_dir / "g_s.pt");
  adapt::StyleGenerator g_t = adapt::load_generator(gen_dir / "g_t.pt");
  const auto manifest =
      adapt::generate_pseudo_dataset(g_s, g_t, cfg.n_pairs, cfg.truncation, out_dir, cfg.first_pair_seed);
  out << "wrote " << manifest.size() << " pairs -> " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_filter_pairs(const core::TrainConfig& cfg, const Invocation& inv, std::ostream& out) {
  const auto seg = priors::make_segmenter(cfg.seg_provider, cfg.seg_weights);
  const auto manifest = select::filter_dataset(inv.paths.at("data"), *seg, cfg.bce_threshold);
  int64_t kept = 0;
  for (const auto& rec : manifest) kept += rec.kept.value_or(false) ? 1 : 0;
  out << "kept " << kept << " of " << manifest.size() << " pairs\n";
  return kExitOk;
}

int cmd_train(const core::TrainConfig& cfg, const Invocation& inv, std::ostream& out, std::ostream& err) {
  const fs::path out_dir = inv.paths.at("out");
  write_config(cfg, out_dir);
  const fs::path latest = out_dir / "latest.pt";

  std::unique_ptr<i2i::TrainState> state;
  if (inv.resume && fs::exists(latest)) {
    state = std::make_unique<i2i::TrainState>(i2i::load_checkpoint(latest));
    state->cfg.epochs = cfg.epochs;
    err << "resuming after epoch " << state->epochs_done << "\n";
  } else {
    state = std::make_unique<i2i::TrainState>(cfg);
  }
  const auto& c = state->cfg;

  i2i::TrainingData data;
  data.real = load_dir(inv.paths.at("real"), c.resolution);
  data.anime = load_dir(inv.paths.at("anime"), c.resolution);
  if (c.supervised) {
    if (inv.paths.at("pairs").empty()) throw ConfigError("supervised training needs --pairs");
    for (auto& pair : core::load_pairs(inv.paths.at("pairs"))) {
      if (pair.x_p.height() != c.resolution || pair.x_p.width() != c.resolution) {
        pair.x_p = core::resize(pair.x_p, c.resolution, c.resolution);
        pair.y_p = core::resize(pair.y_p, c.resolution, c.resolution);
      }
      data.pairs.push_back(std::move(pair));
    }
  }
  std::shared_ptr<const priors::PerceptualMetric> perceptual;
  if (c.lambda_content > 0.0) perceptual = priors::make_perceptual(c.perceptual, c.perceptual_weights);

  const bool append = state->epochs_done > 0;
  JsonlWriter metrics(out_dir / "metrics.jsonl", append);
  JsonlWriter epochs(out_dir / "epochs.jsonl", append);
  for (int64_t t = state->epochs_done + 1; t <= c.epochs; ++t) {
    const auto summary = i2i::train_epoch(*state, data, t, perceptual.get(),
                                          [&metrics](const nlohmann::ordered_json& rec) { metrics.write(rec); });
    nlohmann::ordered_json rec;
    rec["epoch"] = summary.epoch;
    rec["iterations"] = summary.iterations;
    rec["lambda_sup"] = summary.lambda_sup;
    rec["means"] = summary.means;
    epochs.write(rec);
    metrics.flush();
    epochs.flush();
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03lld.pt", static_cast<long long>(t));
    i2i::save_checkpoint(*state, out_dir / name);
    i2i::save_checkpoint(*state, latest);
    out << "epoch " << t << " lambda_sup " << summary.lambda_sup << " total " << summary.means.value("total", 0.0)
        << "\n";
  }
  return kExitOk;
}

int cmd_infer(const core::TrainConfig& cfg, const Invocation& inv, std::ostream& out, std::ostream& err) {
  std::optional<int64_t> resolution;
  if (inv.given("resolution")) resolution = cfg.resolution;
  const auto result = eval::infer_batch(fs::path(inv.paths.at("ckpt")), inv.paths.at("in"), inv.paths.at("out"),
                                        resolution);
  for (const auto& f : result.failed) err << "failed: " << f << "\n";
  out << "translated " << result.translated << " images\n";
  return kExitOk;
}

int cmd_eval_fid(const core::TrainConfig& cfg, const Invocation& inv, std::ostream& out) {
  const auto extractor = priors::make_feature_extractor(cfg.fid_extractor, cfg.extractor_weights);
  std::optional<int64_t> resolution;
  if (inv.given("resolution")) resolution = cfg.resolution;
  const torch::Tensor a = eval::directory_features(inv.paths.at("set-a"), *extractor, resolution);
  const torch::Tensor b = eval::directory_features(inv.paths.at("set-b"), *extractor, resolution);
  nlohmann::ordered_json rec;
  rec["fid"] = eval::fid(a, b);
  rec["n_a"] = a.size(0);
  rec["n_b"] = b.size(0);
  out << rec.dump() << "\n";
  return kExitOk;
}

int cmd_eval_bce(const core::TrainConfig& cfg, const Invocation& inv, std::ostream& out) {
  const auto seg = priors::make_segmenter(cfg.seg_provider, cfg.seg_weights);
  nlohmann::ordered_json rec;
  rec["bce"] = eval::bce_metric(fs::path(inv.paths.at("outputs")), fs::path(inv.paths.at("references")), *seg);
  out << rec.dump() << "\n";
  return kExitOk;
}

}  // namespace

core::TrainConfig resolve_config(const std::optional<fs::path>& file, const std::map<std::string, std::string>& overrides) {
  core::TrainConfig cfg;
  std::optional<fs::path> path = file;
  if (!path) {
    if (const char* env = std::getenv("SCENEPIPE_CONFIG"); env != nullptr && *env != '\0') path = fs::path(env);
  }
  if (path) cfg = core::load_config(*path);
  for (const auto& [field, text] : overrides) core::set_config_field(cfg, field, text);
  cfg.validate();
  return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"scene-to-anime translation pipeline", "scenepipe"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Invocation inv;

  struct Command {
    CLI::App* app;
    std::function<int(const core::TrainConfig&)> body;
  };
  std::vector<Command> commands;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_config_flags(*sub, inv);
    return sub;
  };

  {
    auto* sub = add("finetune-gen", "fine-tune the target style generator on anime images");
    add_path(*sub, inv, "anime", "directory of anime PNGs")->required();
    add_path(*sub, inv, "out", "output directory")->required();
    commands.push_back({sub, [&](const core::TrainConfig& c) { return cmd_finetune_gen(c, inv, out); }});
  }
  {
    auto* sub = add("gen-pairs", "sample pseudo pairs from the source/target generators");
    add_path(*sub, inv, "generators", "directory holding g_s.pt and g_t.pt")->required();
    add_path(*sub, inv, "out", "dataset directory")->required();
    commands.push_back({sub, [&](const core::TrainConfig& c) { return cmd_gen_pairs(c, inv, out); }});
  }
  {
    auto* sub = add("filter-pairs", "score pseudo pairs and flag the kept ones in the manifest");
    add_path(*sub, inv, "data", "dataset directory")->required();
    commands.push_back({sub, [&](const core::TrainConfig& c) { return cmd_filter_pairs(c, inv, out); }});
  }
  {
    auto* sub = add("train", "train the translation generator");
    add_path(*sub, inv, "real", "directory of real scene PNGs")->required();
    add_path(*sub, inv, "anime", "directory of anime PNGs")->required();
    add_path(*sub, inv, "pairs", "filtered pseudo-pair dataset");
    add_path(*sub, inv, "out", "run directory")->required();
    sub->add_flag("--resume", inv.resume, "continue from <out>/latest.pt");
    commands.push_back({sub, [&](const core::TrainConfig& c) { return cmd_train(c, inv, out, err); }});
  }
  {
    auto* sub = add("infer", "translate every image in a directory");
    add_path(*sub, inv, "ckpt", "translation checkpoint")->required();
    add_path(*sub, inv, "in", "input directory")->required();
    add_path(*sub, inv, "out", "output directory")->required();
    commands.push_back({sub, [&](const core::TrainConfig& c) { return cmd_infer(c, inv, out, err); }});
  }
  {
    auto* sub = add("eval-fid", "FID between two image directories");
    add_path(*sub, inv, "set-a", "first image directory")->required();
    add_path(*sub, inv, "set-b", "second image directory")->required();
    commands.push_back({sub, [&](const core::TrainConfig& c) { return cmd_eval_fid(c, inv, out); }});
  }
  {
    auto* sub = add("eval-bce", "semantic consistency between outputs and references");
    add_path(*sub, inv, "outputs", "translated images")->required();
    add_path(*sub, inv, "references", "source images, same names/order")->required();
    commands.push_back({sub, [&](const core::TrainConfig& c) { return cmd_eval_bce(c, inv, out); }});
  }
  {
    auto* sub = add("show-config", "print the resolved configuration");
    commands.push_back({sub, [&](const core::TrainConfig& c) {
                          out << core::serialize_config(c);
                          return kExitOk;
                        }});
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  core::TrainConfig cfg;
  try {
    cfg = resolved(inv, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    for (const auto& cmd : commands) {
      if (cmd.app->parsed()) return cmd.body(cfg);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace scenepipe::cli
