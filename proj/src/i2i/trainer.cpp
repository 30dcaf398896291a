#include "scenepipe/i2i/trainer.hpp"

#include <cmath>
#include <numbers>

#include "scenepipe/core/checkpoint.hpp"
#include "scenepipe/core/errors.hpp"
#include "scenepipe/losses/adversarial.hpp"

namespace scenepipe::i2i {

namespace fs = std::filesystem;
using losses::GanKind;
using losses::GanMode;

namespace {

void set_requires_grad(torch::nn::Module& m, bool flag) {
  for (auto& p : m.parameters()) p.set_requires_grad(flag);
}

double finite_value(const torch::Tensor& t, const std::string& term) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) throw NumericError("loss term '" + term + "' is not finite");
  return v;
}

void add_term(LossReport& report, const std::string& name, double weight, const torch::Tensor& value) {
  const double v = finite_value(value, name);
  report.terms.push_back({name, weight, v});
  report.total = report.total.defined() ? report.total + weight * value : weight * value;
}

losses::Critic critic(PatchDiscriminator& d) {
  return [&d](const torch::Tensor& x) { return d->forward(x); };
}

torch::optim::AdamOptions adam(const core::TrainConfig& cfg) {
  return torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2});
}

}  // namespace

double EpochSchedule::lambda_sup(int64_t t) const {
  if (horizon < 1) throw ConfigError("schedule horizon must be >= 1");
  if (t < 1) throw ArgumentError("epoch index is 1-based");
  if (kind == "constant") return 1.0;
  if (kind == "zero") return 0.0;
  if (kind != "cosine") throw ConfigError("unknown supervised-weight schedule '" + kind + "'");
  return std::cos(std::numbers::pi / (2.0 * static_cast<double>(horizon)) * static_cast<double>(t - 1));
}

double LossReport::term(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t.value;
  }
  throw ArgumentError("loss report has no term '" + name + "'");
}

double LossReport::weighted_sum() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.weight * t.value;
  return s;
}

LossReport supervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_p,
                                  const torch::Tensor& x_p, const torch::Tensor& y_p, const torch::Tensor& fake_p,
                                  const core::TrainConfig& cfg, core::Rng& rng) {
  LossReport report;
  add_term(report, "cgan", 1.0, losses::conditional_generator_loss(critic(d_p), x_p, fake_p));
  if (cfg.lambda_style > 0.0) {
    if (cfg.style_variant == "l1") {
      add_term(report, "style", cfg.lambda_style, (fake_p - y_p).abs().mean());
    } else {
      report.key_feats = extract_patch_features(g, heads, y_p, cfg.patches_per_layer, rng);
      report.query_feats = extract_patch_features(g, heads, fake_p, cfg.patches_per_layer, rng, &report.key_feats);
      add_term(report, "style", cfg.lambda_style,
               losses::style_patch_nce(report.query_feats, report.key_feats, cfg.nce_temperature));
    }
  } else {
    report.terms.push_back({"style", 0.0, 0.0});
  }
  return report;
}

LossReport supervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_p,
                                  const core::PseudoPair& pair, const core::TrainConfig& cfg, core::Rng& rng) {
  const torch::Tensor x_p = pair.x_p.batched();
  return supervised_branch_loss(g, heads, d_p, x_p, pair.y_p.batched(), g->forward(x_p), cfg, rng);
}

LossReport unsupervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_u,
                                    const torch::Tensor& x, const torch::Tensor& fake, const core::TrainConfig& cfg,
                                    core::Rng& rng, const priors::PerceptualMetric* perceptual) {
  LossReport report;
  add_term(report, "gan", 1.0,
           losses::adversarial_loss({}, d_u->forward(fake), GanMode::generator, GanKind::least_squares));
  if (cfg.lambda_src > 0.0 || cfg.lambda_hdce > 0.0) {
    report.key_feats = extract_patch_features(g, heads, x, cfg.patches_per_layer, rng);
    report.query_feats = extract_patch_features(g, heads, fake, cfg.patches_per_layer, rng, &report.key_feats);
  }
  if (cfg.lambda_src > 0.0) {
    add_term(report, "src", cfg.lambda_src, losses::src_loss(report.key_feats, report.query_feats, cfg.nce_temperature));
  } else {
    report.terms.push_back({"src", 0.0, 0.0});
  }
  if (cfg.lambda_hdce > 0.0) {
    add_term(report, "hdce", cfg.lambda_hdce,
             losses::hdce_loss(report.key_feats, report.query_feats, cfg.nce_temperature, cfg.hdce_beta));
  } else {
    report.terms.push_back({"hdce", 0.0, 0.0});
  }
  if (cfg.lambda_content > 0.0) {
    if (perceptual == nullptr) throw PriorLoadError("the content term needs a perceptual metric");
    add_term(report, "content", cfg.lambda_content, perceptual->distance(x, fake));
  }
  return report;
}

LossReport unsupervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_u,
                                    const core::ImageTensor& x, const core::ImageTensor&,
                                    const core::TrainConfig& cfg, core::Rng& rng,
                                    const priors::PerceptualMetric* perceptual) {
  const torch::Tensor xb = x.batched();
  return unsupervised_branch_loss(g, heads, d_u, xb, g->forward(xb), cfg, rng, perceptual);
}

TrainState::TrainState(const core::TrainConfig& config) : cfg(config), options(TranslatorOptions::from_config(config)) {
  cfg.validate();
  const core::Rng root(cfg.seed);
  core::Rng g_rng = root.fork("i2i-generator");
  g = TranslationGenerator(options, g_rng);
  core::Rng h_rng = root.fork("i2i-heads");
  heads = ProjectionHeads(tap_channels(g, options.layer_ids), options.embed_dim, h_rng);
  core::Rng du_rng = root.fork("i2i-d-unsup");
  d_u = PatchDiscriminator(3, options.ndf, du_rng);
  core::Rng dp_rng = root.fork("i2i-d-sup");
  d_p = PatchDiscriminator(6, options.ndf, dp_rng);

  auto g_params = g->parameters();
  for (auto& p : heads->parameters()) g_params.push_back(p);
  opt_g = std::make_unique<torch::optim::Adam>(g_params, adam(cfg));
  opt_du = std::make_unique<torch::optim::Adam>(d_u->parameters(), adam(cfg));
  opt_dp = std::make_unique<torch::optim::Adam>(d_p->parameters(), adam(cfg));
}

EpochMetrics train_epoch(TrainState& state, const TrainingData& data, int64_t t,
                         const priors::PerceptualMetric* perceptual, const MetricsSink& sink) {
  const auto& cfg = state.cfg;
  if (data.real.empty() || data.anime.empty()) throw ConfigError("training needs non-empty real and anime sets");
  if (cfg.supervised && data.pairs.empty()) throw ConfigError("supervised training needs at least one pseudo pair");
  if (t < 1 || t > cfg.epochs) throw ConfigError("epoch " + std::to_string(t) + " outside 1.." + std::to_string(cfg.epochs));

  const EpochSchedule schedule{std::max<int64_t>(20, cfg.epochs), cfg.sup_schedule};
  const double lambda_sup = schedule.lambda_sup(t);
  const int64_t n_real = static_cast<int64_t>(data.real.size());
  const int64_t n_anime = static_cast<int64_t>(data.anime.size());
  const int64_t n_pairs = static_cast<int64_t>(data.pairs.size());
  const int64_t iters = std::max(n_real, n_anime);
  const auto ut = static_cast<uint64_t>(t);

  const core::Rng root(cfg.seed);
  const torch::Tensor perm_real = root.fork("shuffle-real", {ut}).permutation(n_real);
  const torch::Tensor perm_anime = root.fork("shuffle-anime", {ut}).permutation(n_anime);
  const torch::Tensor perm_pairs = root.fork("shuffle-pairs", {ut}).permutation(std::max<int64_t>(n_pairs, 1));

  EpochMetrics metrics;
  metrics.epoch = t;
  metrics.iterations = iters;
  metrics.lambda_sup = lambda_sup;
  nlohmann::ordered_json sums = nlohmann::ordered_json::object();

  for (int64_t i = 0; i < iters; ++i) {
    const auto ui = static_cast<uint64_t>(i);
    const torch::Tensor x = data.real[perm_real[i % n_real].item<int64_t>()].batched();
    const torch::Tensor y = data.anime[perm_anime[i % n_anime].item<int64_t>()].batched();
    torch::Tensor x_p;
    torch::Tensor y_p;
    if (cfg.supervised) {
      const auto& pair = data.pairs[perm_pairs[i % n_pairs].item<int64_t>()];
      x_p = pair.x_p.batched();
      y_p = pair.y_p.batched();
      if (x_p.sizes() != y_p.sizes()) throw ShapeError("pseudo pair members differ in shape");
    }

    const torch::Tensor fake = state.g->forward(x);
    const torch::Tensor fake_p = cfg.supervised ? state.g->forward(x_p) : torch::Tensor();

    nlohmann::ordered_json rec;
    rec["epoch"] = t;
    rec["iter"] = i;
    rec["lambda_sup"] = lambda_sup;

    set_requires_grad(*state.d_u, true);
    const torch::Tensor du_loss = losses::adversarial_loss(state.d_u->forward(y), state.d_u->forward(fake.detach()),
                                                           GanMode::discriminator, GanKind::least_squares);
    rec["d_u"] = finite_value(du_loss, "d_u");
    state.opt_du->zero_grad();
    du_loss.backward();
    state.opt_du->step();

    if (cfg.supervised) {
      set_requires_grad(*state.d_p, true);
      const torch::Tensor dp_loss =
          losses::conditional_discriminator_loss(critic(state.d_p), x_p, y_p, fake_p.detach());
      rec["d_p"] = finite_value(dp_loss, "d_p");
      state.opt_dp->zero_grad();
      dp_loss.backward();
      state.opt_dp->step();
    }

    set_requires_grad(*state.d_u, false);
    set_requires_grad(*state.d_p, false);
    core::Rng unsup_rng = root.fork("unsup", {ut, ui});
    const LossReport unsup =
        unsupervised_branch_loss(state.g, state.heads, state.d_u, x, fake, cfg, unsup_rng, perceptual);
    for (const auto& term : unsup.terms) rec["unsup/" + term.name] = term.value;
    rec["unsup_total"] = finite_value(unsup.total, "unsup_total");
    torch::Tensor total = unsup.total;
    if (cfg.supervised) {
      core::Rng sup_rng = root.fork("sup", {ut, ui});
      const LossReport sup = supervised_branch_loss(state.g, state.heads, state.d_p, x_p, y_p, fake_p, cfg, sup_rng);
      for (const auto& term : sup.terms) rec["sup/" + term.name] = term.value;
      const double sup_total = finite_value(sup.total, "sup_total");
      rec["sup_total"] = sup_total;
      rec["weighted_sup"] = lambda_sup * sup_total;
      total = total + lambda_sup * sup.total;
    }
    rec["total"] = finite_value(total, "total");
    state.opt_g->zero_grad();
    total.backward();
    state.opt_g->step();
    set_requires_grad(*state.d_u, true);
    set_requires_grad(*state.d_p, true);

    for (const auto& [key, value] : rec.items()) {
      if (key == "epoch" || key == "iter") continue;
      sums[key] = sums.value(key, 0.0) + value.get<double>();
    }
    if (sink) sink(rec);
  }
  for (const auto& [key, value] : sums.items()) metrics.means[key] = value.get<double>() / static_cast<double>(iters);
  state.epochs_done = t;
  return metrics;
}

void save_checkpoint(const TrainState& state, const fs::path& path) {
  core::CheckpointWriter writer("i2i_state", state.options.to_json());
  writer.add_string("config", core::serialize_config(state.cfg));
  writer.add_int("epochs_done", state.epochs_done);
  writer.add_module("g", *state.g);
  writer.add_module("heads", *state.heads);
  writer.add_module("d_u", *state.d_u);
  writer.add_module("d_p", *state.d_p);
  writer.add_optimizer("g", *state.opt_g);
  writer.add_optimizer("d_u", *state.opt_du);
  writer.add_optimizer("d_p", *state.opt_dp);
  writer.save(path);
}

TrainState load_checkpoint(const fs::path& path) {
  core::CheckpointReader reader(path, "i2i_state");
  core::TrainConfig cfg;
  try {
    cfg = core::parse_config(reader.get_string("config"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint carries an invalid config: ") + e.what());
  }
  TrainState state(cfg);
  if (state.options.to_json() != reader.architecture()) {
    throw CheckpointError("checkpoint architecture header disagrees with its config");
  }
  reader.load_module("g", *state.g);
  reader.load_module("heads", *state.heads);
  reader.load_module("d_u", *state.d_u);
  reader.load_module("d_p", *state.d_p);
  reader.load_optimizer("g", *state.opt_g);
  reader.load_optimizer("d_u", *state.opt_du);
  reader.load_optimizer("d_p", *state.opt_dp);
  state.epochs_done = reader.get_int("epochs_done");
  return state;
}

TranslationGenerator load_translator(const fs::path& path) {
  core::CheckpointReader reader(path, "i2i_state");
  TranslatorOptions options;
  try {
    options = TranslatorOptions::from_json(reader.architecture());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad translator architecture header: ") + e.what());
  }
  core::Rng scratch(0);
  TranslationGenerator g(options, scratch);
  reader.load_module("g", *g);
  g->eval();
  return g;
}

}  // namespace scenepipe::i2i
