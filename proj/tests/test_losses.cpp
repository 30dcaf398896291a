#include "doctest_torch.hpp"

#include <cmath>

#include "oracles.hpp"
#include "scenepipe/core/errors.hpp"
#include "scenepipe/core/rng.hpp"
#include "scenepipe/losses/adversarial.hpp"
#include "scenepipe/losses/contrastive.hpp"
#include "scenepipe/losses/semantic.hpp"
#include "toy_data.hpp"

using namespace scenepipe;
using losses::PatchFeatureSet;
using testing_support::numeric_gradient;
using testing_support::random_feature_set;
using testing_support::random_like;
using testing_support::relative_error;

namespace {

constexpr double kTau = 0.07;

torch::Tensor f64(std::initializer_list<double> v) { return torch::tensor(std::vector<double>(v), torch::kFloat64); }

PatchFeatureSet with_layer_features(PatchFeatureSet set, size_t layer, const torch::Tensor& feats) {
  set.layers[layer].features = feats;
  return set;
}

PatchFeatureSet single_layer(const torch::Tensor& feats) {
  PatchFeatureSet s;
  s.layers.push_back({0, feats, torch::arange(feats.size(0), torch::kInt64)});
  return s;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("info_nce closed forms") {
  const auto q = f64({1, 0, 0});
  // all logits equal -> ln(N+1)
  CHECK(losses::info_nce(q, f64({0, 1, 0}), f64({0, 0, 1}).view({1, 3}), 0.5).item<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(losses::info_nce(q, q, q.repeat({5, 1}), 0.3).item<double>() == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  // q.p = 10, q.n = 0, N = 64, tau = 1
  const auto negs = f64({0, 1, 0}).repeat({64, 1});
  const double v = losses::info_nce(q, q * 10, negs, 1.0).item<double>();
  CHECK(std::abs(v - 0.0029013824212184252) < 1e-12);
}

TEST_CASE("info_nce matches per-query oracle") {
  torch::Generator gen = at::detail::createCPUGenerator(11);
  for (int trial = 0; trial < 8; ++trial) {
    const auto q = torch::randn({4}, gen, torch::kFloat64);
    const auto p = torch::randn({4}, gen, torch::kFloat64);
    const auto n = torch::randn({7, 4}, gen, torch::kFloat64);
    const double expected = oracle::info_nce(oracle::to_vec(q), oracle::to_vec(p), oracle::to_mat(n), 0.5);
    CHECK(std::abs(losses::info_nce(q, p, n, 0.5).item<double>() - expected) <= 1e-6);
  }
}

TEST_CASE("info_nce bounds and monotonicity") {
  torch::Generator gen = at::detail::createCPUGenerator(3);
  const auto q = torch::randn({6}, gen, torch::kFloat64);
  const auto n = torch::randn({5, 6}, gen, torch::kFloat64);
  const auto dir = q / q.dot(q);
  double prev = INFINITY;
  for (double s = -3.0; s <= 3.0; s += 0.5) {
    const auto p = dir * s;  // q.p == s
    const double v = losses::info_nce(q, p, n, 0.7).item<double>();
    const double max_neg = n.matmul(q).max().item<double>();
    CHECK(v > 0.0);
    CHECK(v >= std::log1p(std::exp(-(s - max_neg) / 0.7)) - 1e-12);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("info_nce errors") {
  const auto q = f64({1, 0});
  CHECK_THROWS_AS(losses::info_nce(q, q, torch::zeros({0, 2}, torch::kFloat64), 1.0), ArgumentError);
  CHECK_THROWS_AS(losses::info_nce(q, f64({1, 0, 0}), torch::zeros({1, 2}, torch::kFloat64), 1.0), ShapeError);
  CHECK_THROWS_AS(losses::info_nce(q, q, torch::zeros({1, 3}, torch::kFloat64), 1.0), ShapeError);
  CHECK_THROWS_AS(losses::info_nce(q, q, torch::zeros({1, 2}, torch::kFloat64), 0.0), ArgumentError);
}

TEST_CASE("patch_nce equals the per-query loop") {
  torch::Generator gen = at::detail::createCPUGenerator(4);
  const auto qs = torch::randn({8, 4}, gen, torch::kFloat64);
  const auto ks = torch::randn({8, 4}, gen, torch::kFloat64);
  CHECK(std::abs(losses::patch_nce(qs, ks, 0.9).item<double>() -
                 oracle::patch_nce(oracle::to_mat(qs), oracle::to_mat(ks), 0.9)) <= 1e-6);
}

TEST_CASE("style_patch_nce closed forms") {
  // one layer, two patches, every normalized dot equal: ln 2 per query, mean over queries
  const auto same = f64({1, 2, 3}).repeat({2, 1});
  CHECK(losses::style_patch_nce(single_layer(same), single_layer(same), kTau).item<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // identical, mutually orthogonal features
  const auto eye = torch::eye(8, torch::kFloat64);
  const double expected = std::log1p(7.0 * std::exp(-1.0 / kTau));
  CHECK(std::abs(losses::style_patch_nce(single_layer(eye), single_layer(eye), kTau).item<double>() - expected) < 1e-12);
  CHECK(expected < 1e-5);
}

TEST_CASE("style_patch_nce matches oracle on two layers") {
  torch::Generator gen = at::detail::createCPUGenerator(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto tgt = random_feature_set(gen, {8, 8}, 6);
    const auto g = random_like(gen, tgt);
    CHECK(std::abs(losses::style_patch_nce(g, tgt, kTau).item<double>() - oracle::style_patch_nce(g, tgt, kTau)) <= 1e-5);
  }
}

TEST_CASE("alignment is enforced") {
  torch::Generator gen = at::detail::createCPUGenerator(6);
  const auto a = random_feature_set(gen, {4, 4}, 3);
  auto b = random_like(gen, a);
  CHECK(a.aligned_with(b));
  b.layers[1].locations = b.layers[1].locations.flip(0);
  CHECK_FALSE(a.aligned_with(b));
  CHECK_THROWS_AS(losses::style_patch_nce(a, b, kTau), AlignmentError);
  CHECK_THROWS_AS(losses::src_loss(a, b, kTau), AlignmentError);
  CHECK_THROWS_AS(losses::hdce_loss(a, b, kTau, 1.0), AlignmentError);
  auto c = random_like(gen, a);
  c.layers[0].layer_id = 99;
  CHECK_THROWS_AS(losses::style_patch_nce(a, c, kTau), AlignmentError);
  auto d = a;
  d.layers.pop_back();
  CHECK_THROWS_AS(losses::style_patch_nce(a, d, kTau), AlignmentError);

  const auto one = random_feature_set(gen, {1}, 3);
  CHECK_THROWS_AS(losses::src_loss(one, one, kTau), ArgumentError);
  CHECK_THROWS_AS(losses::hdce_loss(one, one, kTau, 1.0), ArgumentError);
}

TEST_CASE("jensen_shannon") {
  const auto p = f64({0.2, 0.3, 0.5}).view({1, 3});
  CHECK(losses::jensen_shannon(p, p).item<double>() == doctest::Approx(0.0).epsilon(1e-15));
  const auto a = f64({1.0 - 1e-12, 1e-12}).view({1, 2});
  const auto b = f64({1e-12, 1.0 - 1e-12}).view({1, 2});
  CHECK(std::abs(losses::jensen_shannon(a, b).item<double>() - std::log(2.0)) < 1e-9);
  const auto q = f64({0.6, 0.1, 0.3}).view({1, 3});
  CHECK(std::abs(losses::jensen_shannon(p, q).item<double>() - oracle::jsd({0.2, 0.3, 0.5}, {0.6, 0.1, 0.3})) < 1e-12);
}

TEST_CASE("off_diagonal") {
  const auto m = torch::arange(9, torch::kFloat64).view({3, 3});
  CHECK(torch::equal(losses::off_diagonal(m), f64({1, 2, 3, 5, 6, 7}).view({3, 2})));
}

TEST_CASE("src_loss properties") {
  torch::Generator gen = at::detail::createCPUGenerator(7);
  const auto a = random_feature_set(gen, {8, 8}, 5);
  const auto b = random_like(gen, a);
  CHECK(losses::src_loss(a, a, kTau).item<double>() == doctest::Approx(0.0).epsilon(1e-12));
  const double ab = losses::src_loss(a, b, kTau).item<double>();
  CHECK(ab == doctest::Approx(losses::src_loss(b, a, kTau).item<double>()).epsilon(1e-12));
  CHECK(ab > 0.0);
  CHECK(ab <= std::log(2.0));
  CHECK(std::abs(ab - oracle::src_loss(a, b, kTau)) <= 1e-6);
}

TEST_CASE("src_loss approaches ln 2 for opposite one-hot relations") {
  // patch 0 is near patch 1 in the source and near patch 2 in the output
  const auto s = f64({1, 0, 0.8, 0.6, 0, 1}).view({3, 2});
  const auto g = f64({1, 0, 0, 1, 0.8, 0.6}).view({3, 2});
  const double tau = 1e-3;
  const auto sa = single_layer(s);
  const auto ga = single_layer(g);
  // patch 0 flips (1,0) -> (0,1); patches 1 and 2 keep their relations
  const double v = losses::src_loss(sa, ga, tau).item<double>();
  CHECK(std::isfinite(v));
  CHECK(std::abs(v - oracle::src_loss(sa, ga, tau)) < 1e-9);
  CHECK(std::abs(oracle::jsd({1.0, 0.0}, {0.0, 1.0}) - std::log(2.0)) < 1e-15);
  auto g_leaf = g.clone().requires_grad_();
  losses::src_loss(sa, single_layer(g_leaf), tau).backward();
  CHECK(torch::isfinite(g_leaf.grad()).all().item<bool>());
}

TEST_CASE("hdce_loss reductions and oracle") {
  torch::Generator gen = at::detail::createCPUGenerator(8);
  const auto src = random_feature_set(gen, {8, 8}, 6);
  const auto out = random_like(gen, src);
  const double b0 = losses::hdce_loss(src, out, kTau, 0.0).item<double>();
  CHECK(std::abs(b0 - losses::style_patch_nce(out, src, kTau).item<double>()) <= 1e-7);
  CHECK(std::abs(losses::hdce_loss(src, out, kTau, 1.0).item<double>() - oracle::hdce_loss(src, out, kTau, 1.0)) <= 1e-5);
  CHECK(std::abs(losses::hdce_loss(src, out, kTau, 3.0).item<double>() - oracle::hdce_loss(src, out, kTau, 3.0)) <= 1e-5);

  // identical negatives: weights are uniform whatever beta is
  torch::Tensor k = torch::ones({5, 4}, torch::kFloat64);
  k[0] = f64({1, -1, 2, 0});
  torch::Tensor q = torch::ones({5, 4}, torch::kFloat64);
  q[0] = f64({0.5, 1, 1, 1});
  auto ks = single_layer(k);
  auto qs = single_layer(q);
  // only query 0 has identical negatives (rows 1..4 of k); compare that query
  const auto k0 = losses::hdce_loss(ks, qs, kTau, 0.0).item<double>();
  const auto k5 = losses::hdce_loss(ks, qs, kTau, 5.0).item<double>();
  const double or0 = oracle::hdce_loss(ks, qs, kTau, 0.0);
  const double or5 = oracle::hdce_loss(ks, qs, kTau, 5.0);
  CHECK(std::abs(k0 - or0) < 1e-7);
  CHECK(std::abs(k5 - or5) < 1e-7);
  ks = single_layer(torch::cat({k.slice(0, 0, 1), k.slice(0, 1, 2).repeat({4, 1})}));
  const auto all_same = single_layer(f64({1, 2, 3, 4}).repeat({5, 1}));
  CHECK(std::abs(losses::hdce_loss(all_same, qs, kTau, 0.0).item<double>() -
                 losses::hdce_loss(all_same, qs, kTau, 5.0).item<double>()) < 1e-12);
}

TEST_CASE("hdce weights emphasize hard negatives") {
  // a negative that looks like the query raises the loss more as beta grows
  torch::Generator gen = at::detail::createCPUGenerator(9);
  const auto src = random_feature_set(gen, {8}, 6);
  const auto out = random_like(gen, src);
  CHECK(losses::hdce_loss(src, out, kTau, 4.0).item<double>() > losses::hdce_loss(src, out, kTau, 0.0).item<double>());
}

TEST_CASE("adversarial losses") {
  using losses::GanKind;
  using losses::GanMode;
  const auto ones = torch::ones({2, 1, 3, 3});
  const auto zeros = torch::zeros({2, 1, 3, 3});
  CHECK(losses::adversarial_loss(ones, zeros, GanMode::discriminator, GanKind::least_squares).item<double>() == 0.0);
  CHECK(losses::adversarial_loss({}, ones, GanMode::generator, GanKind::least_squares).item<double>() == 0.0);
  CHECK(losses::adversarial_loss(zeros, zeros, GanMode::discriminator, GanKind::nonsaturating).item<double>() ==
        doctest::Approx(2.0 * std::log(2.0)));
  CHECK(losses::adversarial_loss({}, zeros, GanMode::generator, GanKind::nonsaturating).item<double>() ==
        doctest::Approx(std::log(2.0)));
  CHECK(losses::adversarial_loss(zeros, ones, GanMode::discriminator, GanKind::least_squares).item<double>() ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(losses::adversarial_loss({}, torch::full({2}, NAN), GanMode::generator, GanKind::least_squares),
                  NumericError);
}

TEST_CASE("conditional adversarial loss") {
  core::Rng rng(1);
  const auto x = rng.uniform({1, 3, 8, 8}, -1, 1);
  const auto y = rng.uniform({1, 3, 8, 8}, -1, 1);
  CHECK(losses::conditional_input(y, x).size(1) == 6);
  CHECK_THROWS_AS(losses::conditional_input(y, torch::zeros({1, 3, 4, 4})), ShapeError);

  torch::nn::Conv2d conv(torch::nn::Conv2dOptions(6, 1, 3));
  const losses::Critic d = [&](const torch::Tensor& in) { return conv->forward(in); };
  CHECK_FALSE(torch::equal(d(losses::conditional_input(y, x)), d(losses::conditional_input(y, -x))));

  // a critic that outputs 1 on (y, x) and 0 on anything whose first half is `fake`
  const auto fake = torch::zeros_like(y);
  const losses::Critic oracle_d = [&](const torch::Tensor& in) {
    const bool real = torch::equal(in.slice(1, 0, 3), y);
    return real ? torch::ones({1, 1, 2, 2}) : torch::zeros({1, 1, 2, 2});
  };
  CHECK(losses::conditional_discriminator_loss(oracle_d, x, y, fake).item<double>() == 0.0);
  CHECK(losses::conditional_generator_loss(oracle_d, x, fake).item<double>() == doctest::Approx(0.5));
}

TEST_CASE("global semantic loss") {
  priors::MockEmbedder emb;
  priors::MockPerceptual lp;
  const auto x = testing_support::toy_scene(testing_support::ToyStyle::real, 16, 16, 4).batched();
  const auto y = testing_support::toy_scene(testing_support::ToyStyle::anime, 16, 16, 5).batched();
  CHECK(losses::global_semantic_loss(x, x, emb, lp, 0.01).item<double>() == doctest::Approx(0.0).epsilon(1e-6));
  const double pure = losses::global_semantic_loss(x, y, emb, lp, 0.0).item<double>();
  CHECK(pure >= 0.0);
  CHECK(pure <= 2.0);
  CHECK_THROWS_AS(losses::global_semantic_loss(x, torch::zeros({1, 3, 8, 8}), emb, lp, 0.01), ShapeError);
}

TEST_CASE("global semantic loss by hand on 2x2 images") {
  priors::MockEmbedder emb;
  priors::MockPerceptual lp;
  torch::Tensor a = torch::zeros({1, 3, 2, 2}, torch::kFloat64);
  a.index_put_({0, torch::indexing::Slice(), 0, 0}, 1.0);
  const torch::Tensor b = torch::zeros_like(a);
  oracle::Vec ea, eb;
  for (int64_t d = 0; d < emb.dim(); ++d) {
    double row = 0.0;
    for (int c = 0; c < 3; ++c) row += emb.projection()[d][c].item<double>() * 0.25;
    ea.push_back(row + emb.bias()[d].item<double>());
    eb.push_back(emb.bias()[d].item<double>());
  }
  const double cos = oracle::dot(ea, eb) / std::sqrt(oracle::dot(ea, ea) * oracle::dot(eb, eb));
  const double expected = (1.0 - cos) + 0.01 * 0.09765625;
  CHECK(losses::global_semantic_loss(a, b, emb, lp, 0.01).item<double>() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("patch locations") {
  core::Rng rng(2);
  const auto locs = losses::sample_patch_locations(40, 40, 16, 32, rng);
  CHECK(locs.size() == 16);
  for (size_t i = 0; i < locs.size(); ++i) {
    CHECK(locs[i].row + 32 <= 40);
    for (size_t j = i + 1; j < locs.size(); ++j) CHECK_FALSE(locs[i] == locs[j]);
  }
  CHECK_THROWS_AS(losses::sample_patch_locations(16, 16, 2, 32, rng), BoundsError);
  CHECK_THROWS_AS(losses::sample_patch_locations(33, 33, 5, 32, rng), ArgumentError);
}

TEST_CASE("finetune patch loss") {
  priors::MockEmbedder emb;
  const auto x = testing_support::toy_scene(testing_support::ToyStyle::real, 64, 64, 7).batched();
  core::Rng r1(3), r2(3);
  const double v1 = losses::finetune_patch_loss(x, x, emb, 16, 32, r1).item<double>();
  const double v2 = losses::finetune_patch_loss(x, x, emb, 16, 32, r2).item<double>();
  CHECK(v1 == v2);
  CHECK(v1 < std::log(16.0));

  // constant images: all patch embeddings equal, so every logit ties
  const auto flat = torch::zeros({1, 3, 40, 40});
  core::Rng r3(4);
  CHECK(losses::finetune_patch_loss(flat, flat, emb, 2, 32, r3).item<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));

  core::Rng r4(5);
  CHECK_THROWS_AS(losses::finetune_patch_loss(x, x, emb, 1, 32, r4), ArgumentError);
  CHECK_THROWS_AS(losses::finetune_patch_loss(x, x, emb, 2, 80, r4), BoundsError);
}

TEST_CASE("gradients match finite differences") {
  torch::Generator gen = at::detail::createCPUGenerator(21);
  auto check = [](const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x0) {
    auto x = x0.clone().requires_grad_();
    f(x).backward();
    const auto numeric = numeric_gradient([&](const torch::Tensor& v) { return f(v).item<double>(); }, x0);
    return relative_error(x.grad(), numeric);
  };
  const auto q = torch::randn({8}, gen, torch::kFloat64);
  const auto p = torch::randn({8}, gen, torch::kFloat64);
  const auto n = torch::randn({5, 8}, gen, torch::kFloat64);
  CHECK(check([&](const torch::Tensor& v) { return losses::info_nce(v, p, n, 0.5); }, q) <= 1e-3);

  const auto tgt = random_feature_set(gen, {6, 6}, 8);
  const auto g = random_like(gen, tgt);
  CHECK(check([&](const torch::Tensor& v) {
          return losses::style_patch_nce(with_layer_features(g, 1, v), tgt, kTau);
        }, g.layers[1].features) <= 1e-3);
  CHECK(check([&](const torch::Tensor& v) { return losses::src_loss(tgt, with_layer_features(g, 0, v), kTau); },
              g.layers[0].features) <= 1e-3);
  CHECK(check([&](const torch::Tensor& v) { return losses::hdce_loss(tgt, with_layer_features(g, 0, v), kTau, 1.0); },
              g.layers[0].features) <= 1e-3);
  CHECK(check([&](const torch::Tensor& v) { return losses::hdce_loss(with_layer_features(tgt, 0, v), g, kTau, 1.0); },
              tgt.layers[0].features) <= 1e-3);
}

}  // TEST_SUITE
