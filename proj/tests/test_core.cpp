#include "doctest_torch.hpp"

#include <fstream>

#include <png.h>

#include "scenepipe/core/checkpoint.hpp"
#include "scenepipe/core/config.hpp"
#include "scenepipe/core/dataset.hpp"
#include "scenepipe/core/errors.hpp"
#include "scenepipe/core/image.hpp"
#include "scenepipe/core/rng.hpp"
#include "temp_dir.hpp"
#include "toy_data.hpp"

using namespace scenepipe;
using testing_support::TempDir;

namespace {

void write_png(const std::filesystem::path& path, int w, int h, int format, uint8_t value) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = w;
  img.height = h;
  img.format = format;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img), value);
  REQUIRE(png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr) != 0);
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("image tensor validation") {
  CHECK_NOTHROW(core::ImageTensor::from_tensor(torch::zeros({3, 4, 4})));
  CHECK(core::ImageTensor::from_tensor(torch::zeros({1, 3, 4, 5})).width() == 5);
  CHECK_THROWS_AS(core::ImageTensor::from_tensor(torch::zeros({4, 4, 4})), ChannelError);
  CHECK_THROWS_AS(core::ImageTensor::from_tensor(torch::zeros({4, 4})), ShapeError);
  CHECK_THROWS_AS(core::ImageTensor::from_tensor(torch::full({3, 2, 2}, 1.5)), ArgumentError);
  CHECK_THROWS_AS(core::ImageTensor::from_tensor(torch::full({3, 2, 2}, NAN)), NumericError);
  // tiny excursions are clamped
  const auto img = core::ImageTensor::from_tensor(torch::full({3, 2, 2}, 1.0 + 1e-7));
  CHECK(img.tensor().max().item<float>() <= 1.0f);
  CHECK(img.tensor().dtype() == torch::kFloat32);
}

TEST_CASE("load white and mid-gray") {
  TempDir dir;
  write_png(dir / "white.png", 8, 6, PNG_FORMAT_RGB, 255);
  write_png(dir / "gray.png", 8, 6, PNG_FORMAT_RGB, 128);
  const auto white = core::load_image(dir / "white.png");
  CHECK(white.height() == 6);
  CHECK(white.width() == 8);
  CHECK(torch::allclose(white.tensor(), torch::ones({3, 6, 8})));
  // 8-bit has no exact midpoint: 128 lands 1/255 above zero
  const auto gray = core::load_image(dir / "gray.png");
  CHECK(gray.tensor().abs().max().item<double>() <= 1.0 / 255.0 + 1e-7);
  CHECK(core::unit_to_byte(0.0f) == 128);
}

TEST_CASE("load resizes to the requested resolution") {
  TempDir dir;
  write_png(dir / "big.png", 512, 512, PNG_FORMAT_RGBA, 200);
  const auto img = core::load_image(dir / "big.png", 256);
  CHECK(img.tensor().sizes() == torch::IntArrayRef({3, 256, 256}));
  CHECK(img.tensor()[0][10][10].item<float>() == doctest::Approx(200.0 / 127.5 - 1.0).epsilon(1e-5));
}

TEST_CASE("load errors") {
  TempDir dir;
  write_png(dir / "gray8.png", 4, 4, PNG_FORMAT_GRAY, 10);
  CHECK_THROWS_AS(core::load_image(dir / "gray8.png"), ChannelError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(core::load_image(dir / "junk.png"), DecodeError);
  CHECK_THROWS_AS(core::load_image(dir / "missing.png"), DecodeError);
}

TEST_CASE("save/load round trip within quantization") {
  TempDir dir;
  const auto img = testing_support::toy_scene(testing_support::ToyStyle::real, 16, 24, 3);
  core::save_image(img, dir / "sub" / "a.png");
  const auto back = core::load_image(dir / "sub" / "a.png");
  CHECK((back.tensor() - img.tensor()).abs().max().item<double>() <= 1.0 / 127.5);
  core::save_image(back, dir / "b.png");
  CHECK(core::load_image(dir / "b.png") == back);
}

TEST_CASE("list_images is sorted and png-only") {
  TempDir dir;
  for (const char* n : {"b.png", "a.png", "c.txt"}) std::ofstream(dir / n) << "x";
  const auto files = core::list_images(dir.path());
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.png");
  CHECK_THROWS_AS(core::list_images(dir / "nope"), PersistenceError);
}

TEST_CASE("rng determinism") {
  core::Rng a(0), b(0), c(1);
  const auto xa = a.normal({100}, 0.0, 1.0, torch::kFloat64);
  const auto xb = b.normal({100}, 0.0, 1.0, torch::kFloat64);
  const auto xc = c.normal({100}, 0.0, 1.0, torch::kFloat64);
  CHECK(torch::equal(xa, xb));
  CHECK_FALSE(torch::equal(xa, xc));

  core::Rng p(5);
  const auto f1 = p.fork("x", {1, 2}).next_u64();
  const auto f2 = p.fork("x", {1, 2}).next_u64();
  CHECK(f1 == f2);
  CHECK(p.fork("x", {1, 3}).next_u64() != f1);
  CHECK(p.fork("y", {1, 2}).next_u64() != f1);
  // forking does not advance the parent
  core::Rng q(5);
  CHECK(p.next_u64() == q.next_u64());

  core::Rng r(9);
  for (int i = 0; i < 200; ++i) {
    const auto v = r.uniform_int(-2, 3);
    CHECK(v >= -2);
    CHECK(v <= 3);
  }
  const auto perm = r.permutation(10);
  CHECK(torch::equal(std::get<0>(perm.sort()), torch::arange(10)));
}

TEST_CASE("config defaults") {
  const core::TrainConfig cfg;
  CHECK(cfg.lambda_lpips == 0.01);
  CHECK(cfg.lambda_global == 1.0);
  CHECK(cfg.lambda_patch == 0.05);
  CHECK(cfg.finetune_iters == 1000);
  CHECK(cfg.truncation == 0.7);
  CHECK(cfg.n_pairs == 30000);
  CHECK(cfg.lambda_style == 0.05);
  CHECK(cfg.lambda_src == 0.05);
  CHECK(cfg.lambda_hdce == 0.1);
  CHECK(cfg.epochs == 20);
  CHECK(cfg.bce_threshold == 5.0);
  CHECK(cfg.patch_count_finetune == 16);
  CHECK(cfg.patch_size_finetune == 32);
  CHECK(cfg.patches_per_layer == 256);
  CHECK(cfg.feature_layer_ids == std::vector<int64_t>{0, 4, 8, 12, 16});
  CHECK(cfg.embed_dim == 256);
  CHECK(cfg.batch_size == 1);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config round trip") {
  core::TrainConfig cfg;
  cfg.seed = 77;
  cfg.lambda_style = 0.123456789012345;
  cfg.truncation = 0.3;
  cfg.feature_layer_ids = {0, 8};
  cfg.style_variant = "l1";
  cfg.supervised = false;
  cfg.seg_weights = "/tmp/x.pt";
  const std::string text = core::serialize_config(cfg);
  const auto back = core::parse_config(text);
  CHECK(core::serialize_config(back) == text);
  CHECK(back.lambda_style == cfg.lambda_style);
  CHECK(back.feature_layer_ids == cfg.feature_layer_ids);

  TempDir dir;
  core::save_config(cfg, dir / "c.json");
  CHECK(core::serialize_config(core::load_config(dir / "c.json")) == text);
}

TEST_CASE("config partial files and errors") {
  const auto cfg = core::parse_config(R"({"lambda_src": 0.5, "epochs": 3})");
  CHECK(cfg.lambda_src == 0.5);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.lambda_hdce == 0.1);
  CHECK_THROWS_AS(core::parse_config(R"({"lambda_bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(core::parse_config(R"({"epochs": "three"})"), ConfigError);
  CHECK_THROWS_AS(core::parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(core::load_config("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    core::TrainConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](auto& c) { c.lambda_style = -1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.truncation = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.truncation = 1.5; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.feature_layer_ids = {4, 0}; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.sup_schedule = "linear"; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.style_variant = "l2"; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.trainable_blocks = 9; }).validate(), ConfigError);
}

TEST_CASE("set_config_field parses by field type") {
  core::TrainConfig cfg;
  core::set_config_field(cfg, "lambda_style", "0.25");
  core::set_config_field(cfg, "epochs", "4");
  core::set_config_field(cfg, "supervised", "false");
  core::set_config_field(cfg, "feature_layer_ids", "0,4,8");
  core::set_config_field(cfg, "sup_schedule", "zero");
  CHECK(cfg.lambda_style == 0.25);
  CHECK(cfg.epochs == 4);
  CHECK_FALSE(cfg.supervised);
  CHECK(cfg.feature_layer_ids == std::vector<int64_t>{0, 4, 8});
  CHECK(cfg.sup_schedule == "zero");
  CHECK_THROWS_AS(core::set_config_field(cfg, "epochs", "x"), ConfigError);
  CHECK_THROWS_AS(core::set_config_field(cfg, "nope", "1"), ConfigError);
  CHECK(core::config_field_names().size() > 40);
}

TEST_CASE("manifest lines round trip") {
  core::ManifestRecord rec;
  rec.seed = 42;
  CHECK((core::parse_manifest_line(core::format_manifest_line(rec)) == rec));
  rec.bce_score = 4.5;
  rec.category_count = 3;
  rec.kept = true;
  CHECK((core::parse_manifest_line(core::format_manifest_line(rec)) == rec));
  CHECK_THROWS(core::parse_manifest_line("{}"));

  TempDir dir;
  core::Manifest m{rec, core::ManifestRecord{7, {}, {}, {}}};
  core::write_manifest(m, core::manifest_path(dir.path()));
  CHECK((core::read_manifest(core::manifest_path(dir.path())) == m));
}

TEST_CASE("dataset layout and pair persistence") {
  TempDir dir;
  CHECK(core::real_path(dir.path(), 12).filename() == "00000012_real.png");
  CHECK(core::anime_path(dir.path(), 12).filename() == "00000012_anime.png");
  core::PseudoPair pair;
  pair.seed = 12;
  pair.x_p = testing_support::toy_scene(testing_support::ToyStyle::real, 8, 8, 1);
  pair.y_p = testing_support::toy_scene(testing_support::ToyStyle::anime, 8, 8, 1);
  core::save_pair(pair, dir.path());
  core::ManifestRecord rec;
  rec.seed = 12;
  const auto back = core::load_pair(dir.path(), rec);
  CHECK(back.seed == 12);
  CHECK((back.x_p.tensor() - pair.x_p.tensor()).abs().max().item<double>() <= 1.0 / 127.5);
  rec.seed = 13;
  CHECK_THROWS_AS(core::load_pair(dir.path(), rec), PersistenceError);

  core::ManifestRecord kept{12, 1.0, 2, true};
  core::ManifestRecord dropped{12, 9.0, 1, false};
  core::write_manifest({kept}, core::manifest_path(dir.path()));
  CHECK(core::load_pairs(dir.path()).size() == 1);
  core::write_manifest({dropped}, core::manifest_path(dir.path()));
  CHECK(core::load_pairs(dir.path()).empty());
  CHECK(core::load_pairs(dir.path(), false).size() == 1);
}

TEST_CASE("checkpoint container") {
  TempDir dir;
  torch::nn::Linear lin(3, 2);
  core::CheckpointWriter w("thing", nlohmann::json{{"in", 3}});
  w.add_module("lin", *lin);
  w.add_int("n", 5);
  w.add_string("s", "hello");
  w.save(dir / "a.pt");

  core::CheckpointReader r(dir / "a.pt", "thing");
  CHECK(r.architecture()["in"] == 3);
  CHECK(r.get_int("n") == 5);
  CHECK(r.get_string("s") == "hello");
  torch::nn::Linear other(3, 2);
  r.load_module("lin", *other);
  CHECK(torch::equal(other->weight, lin->weight));
  CHECK_THROWS_AS(r.get_int("missing"), CheckpointError);

  CHECK_THROWS_AS(core::CheckpointReader(dir / "a.pt", "other"), CheckpointError);
  CHECK_THROWS_AS(core::CheckpointReader(dir / "none.pt", "thing"), CheckpointError);

  // truncated file
  const auto size = std::filesystem::file_size(dir / "a.pt");
  std::filesystem::copy_file(dir / "a.pt", dir / "t.pt");
  std::filesystem::resize_file(dir / "t.pt", size / 2);
  CHECK_THROWS_AS(core::CheckpointReader(dir / "t.pt", "thing"), CheckpointError);

  // version mismatch
  torch::serialize::OutputArchive ar;
  ar.write("meta/format", c10::IValue(std::string("scenepipe-checkpoint")));
  ar.write("meta/version", c10::IValue(core::kCheckpointVersion + 1));
  ar.write("meta/kind", c10::IValue(std::string("thing")));
  ar.write("meta/architecture", c10::IValue(std::string("{}")));
  ar.save_to((dir / "v.pt").string());
  CHECK_THROWS_AS(core::CheckpointReader(dir / "v.pt", "thing"), CheckpointError);
}

}  // TEST_SUITE
